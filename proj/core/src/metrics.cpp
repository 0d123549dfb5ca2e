#include "segforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "binio.hpp"

namespace segforge {

int LabelSchema::num_labels() const {
  int max_id = -1;
  for (const ClassDef& c : classes) max_id = std::max(max_id, c.id);
  return max_id + 1;
}

const ClassDef* LabelSchema::find(int id) const {
  for (const ClassDef& c : classes)
    if (c.id == id) return &c;
  return nullptr;
}

bool LabelSchema::is_void(int id) const {
  const ClassDef* c = find(id);
  return c == nullptr || c->is_void;
}

std::vector<std::string> LabelSchema::scored_categories() const {
  std::vector<std::string> cats;
  for (const ClassDef& c : classes) {
    if (c.is_void) continue;
    if (std::find(cats.begin(), cats.end(), c.category) == cats.end())
      cats.push_back(c.category);
  }
  return cats;
}

LabelSchema LabelSchema::cityscapes() {
  // Official label ids; classes marked void are excluded from evaluation.
  static const struct { int id; const char* name; const char* cat; bool v; } defs[] = {
      {0, "unlabeled", "void", true},
      {1, "ego vehicle", "void", true},
      {2, "rectification border", "void", true},
      {3, "out of roi", "void", true},
      {4, "static", "void", true},
      {5, "dynamic", "void", true},
      {6, "ground", "void", true},
      {7, "road", "flat", false},
      {8, "sidewalk", "flat", false},
      {9, "parking", "flat", true},
      {10, "rail track", "flat", true},
      {11, "building", "construction", false},
      {12, "wall", "construction", false},
      {13, "fence", "construction", false},
      {14, "guard rail", "construction", true},
      {15, "bridge", "construction", true},
      {16, "tunnel", "construction", true},
      {17, "pole", "object", false},
      {18, "polegroup", "object", true},
      {19, "traffic light", "object", false},
      {20, "traffic sign", "object", false},
      {21, "vegetation", "nature", false},
      {22, "terrain", "nature", false},
      {23, "sky", "sky", false},
      {24, "person", "human", false},
      {25, "rider", "human", false},
      {26, "car", "vehicle", false},
      {27, "truck", "vehicle", false},
      {28, "bus", "vehicle", false},
      {29, "caravan", "vehicle", true},
      {30, "trailer", "vehicle", true},
      {31, "train", "vehicle", false},
      {32, "motorcycle", "vehicle", false},
      {33, "bicycle", "vehicle", false},
      {34, "license plate", "vehicle", true},
  };
  LabelSchema s;
  for (const auto& d : defs) s.classes.push_back({d.id, d.name, d.cat, d.v});
  return s;
}

LabelSchema LabelSchema::parse(const std::string& text) {
  LabelSchema s;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::set<int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
      line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 4)
      throw std::runtime_error("schema line " + std::to_string(line_no) +
                               ": expected id,name,category,void_flag");
    ClassDef c;
    c.id = std::stoi(fields[0]);
    c.name = fields[1];
    c.category = fields[2];
    if (fields[3] != "0" && fields[3] != "1")
      throw std::runtime_error("schema line " + std::to_string(line_no) +
                               ": void_flag must be 0 or 1");
    c.is_void = fields[3] == "1";
    if (c.id < 0 || !seen.insert(c.id).second)
      throw std::runtime_error("schema line " + std::to_string(line_no) +
                               ": duplicate or negative class id " + std::to_string(c.id));
    s.classes.push_back(std::move(c));
  }
  if (s.classes.empty()) throw std::runtime_error("schema has no classes");
  return s;
}

LabelSchema LabelSchema::load(const std::string& path) {
  return parse(detail::read_file(path));
}

std::string LabelSchema::serialize() const {
  std::ostringstream os;
  os << "# id,name,category,void_flag\n";
  for (const ClassDef& c : classes)
    os << c.id << "," << c.name << "," << c.category << "," << (c.is_void ? 1 : 0) << "\n";
  return os.str();
}

int64_t ConfusionMatrix::total() const {
  int64_t t = 0;
  for (int64_t v : counts) t += v;
  return t;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (n != other.n) throw std::invalid_argument("confusion matrix size mismatch");
  for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

namespace {

int label_at(const Tensor& t, int64_t i, int64_t j) {
  const float v = t.at(i, j, 0);
  return static_cast<int>(std::lround(v));
}

}  // namespace

void accumulate(ConfusionMatrix& cm, const Tensor& gt, const Tensor& pred,
                const LabelSchema& schema) {
  if (gt.rank() != 3 || pred.rank() != 3 || gt.shape[2] != 1 || pred.shape[2] != 1)
    throw std::invalid_argument("accumulate: label maps must be [H,W,1]");
  if (gt.shape[0] != pred.shape[0] || gt.shape[1] != pred.shape[1])
    throw std::invalid_argument("accumulate: gt " + shape_to_string(gt.shape) + " vs pred " +
                                shape_to_string(pred.shape));
  if (cm.n != schema.num_labels())
    throw std::invalid_argument("accumulate: matrix size " + std::to_string(cm.n) +
                                " != schema labels " + std::to_string(schema.num_labels()));

  const int64_t h = gt.shape[0], w = gt.shape[1];
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      const int g = label_at(gt, i, j);
      const int p = label_at(pred, i, j);
      for (const int v : {g, p})
        if (v < 0 || v >= cm.n || schema.find(v) == nullptr)
          throw std::runtime_error("label " + std::to_string(v) + " out of schema range at pixel (" +
                                   std::to_string(i) + "," + std::to_string(j) + ")");
      if (schema.is_void(g)) continue;
      ++cm.at(g, p);
    }
  }
}

namespace {

IouResult iou_from_matrix(const std::vector<int64_t>& m, int n,
                          const std::vector<std::pair<int, std::string>>& scored) {
  IouResult result;
  double sum = 0.0;
  for (const auto& [idx, name] : scored) {
    int64_t row = 0, col = 0;
    for (int k = 0; k < n; ++k) {
      row += m[static_cast<size_t>(idx) * n + k];
      col += m[static_cast<size_t>(k) * n + idx];
    }
    const int64_t tp = m[static_cast<size_t>(idx) * n + idx];
    const int64_t denom = row + col - tp;
    IouEntry e;
    e.id = idx;
    e.name = name;
    e.valid = denom > 0;
    e.iou = e.valid ? static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    if (e.valid) {
      sum += e.iou;
      ++result.valid_count;
    }
    result.entries.push_back(std::move(e));
  }
  result.mean = result.valid_count > 0 ? sum / result.valid_count : 0.0;
  return result;
}

}  // namespace

IouResult class_iou(const ConfusionMatrix& cm, const LabelSchema& schema) {
  std::vector<std::pair<int, std::string>> scored;
  for (const ClassDef& c : schema.classes)
    if (!c.is_void) scored.push_back({c.id, c.name});
  return iou_from_matrix(cm.counts, cm.n, scored);
}

IouResult category_iou(const ConfusionMatrix& cm, const LabelSchema& schema) {
  const std::vector<std::string> cats = schema.scored_categories();
  std::vector<std::string> all_cats = cats;
  for (const ClassDef& c : schema.classes)
    if (std::find(all_cats.begin(), all_cats.end(), c.category) == all_cats.end())
      all_cats.push_back(c.category);

  std::map<int, int> class_to_cat;
  for (const ClassDef& c : schema.classes)
    class_to_cat[c.id] = static_cast<int>(
        std::find(all_cats.begin(), all_cats.end(), c.category) - all_cats.begin());

  // Aggregate the class matrix into category space. Rows with void ground
  // truth are already all zero by construction of accumulate().
  const int nc = static_cast<int>(all_cats.size());
  std::vector<int64_t> m(static_cast<size_t>(nc) * nc, 0);
  for (int g = 0; g < cm.n; ++g) {
    const auto git = class_to_cat.find(g);
    if (git == class_to_cat.end()) continue;
    for (int p = 0; p < cm.n; ++p) {
      const auto pit = class_to_cat.find(p);
      if (pit == class_to_cat.end()) continue;
      m[static_cast<size_t>(git->second) * nc + pit->second] += cm.at(g, p);
    }
  }

  std::vector<std::pair<int, std::string>> scored;
  for (size_t i = 0; i < cats.size(); ++i) scored.push_back({static_cast<int>(i), cats[i]});
  IouResult result = iou_from_matrix(m, nc, scored);
  for (IouEntry& e : result.entries) e.id = -1;
  return result;
}

Tensor softmax_probs(const Tensor& logits) {
  if (logits.rank() != 3) throw std::invalid_argument("softmax_probs: logits must be rank 3");
  for (const float v : logits.f32)
    if (!std::isfinite(v)) throw std::runtime_error("softmax_probs: non-finite logit");

  const int64_t h = logits.shape[0], w = logits.shape[1], ch = logits.shape[2];
  Tensor probs = Tensor::zeros(logits.shape);
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      float m = logits.at(i, j, 0);
      for (int64_t c = 1; c < ch; ++c) m = std::max(m, logits.at(i, j, c));
      double sum = 0.0;
      for (int64_t c = 0; c < ch; ++c) {
        const double e = std::exp(static_cast<double>(logits.at(i, j, c)) - m);
        probs.at(i, j, c) = static_cast<float>(e);
        sum += e;
      }
      for (int64_t c = 0; c < ch; ++c)
        probs.at(i, j, c) = static_cast<float>(probs.at(i, j, c) / sum);
    }
  }
  return probs;
}

double cross_entropy_loss(const Tensor& probs, const Tensor& gt, const LabelSchema& schema,
                          int64_t* clamp_warnings) {
  if (probs.rank() != 3 || gt.rank() != 3 || gt.shape[2] != 1)
    throw std::invalid_argument("cross_entropy_loss: probs [H,W,C] and gt [H,W,1] required");
  if (probs.shape[0] != gt.shape[0] || probs.shape[1] != gt.shape[1])
    throw std::invalid_argument("cross_entropy_loss: spatial dims differ");

  const int64_t h = gt.shape[0], w = gt.shape[1], ch = probs.shape[2];
  double sum = 0.0;
  int64_t scored = 0;
  int64_t clamped = 0;
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      const int y = label_at(gt, i, j);
      if (schema.is_void(y)) continue;
      if (y >= ch)
        throw std::runtime_error("cross_entropy_loss: class " + std::to_string(y) +
                                 " has no probability channel (C = " + std::to_string(ch) + ")");
      double p = probs.at(i, j, y);
      if (p < 1e-12) {
        p = 1e-12;
        ++clamped;
      }
      sum += std::log(p);
      ++scored;
    }
  }
  if (clamp_warnings) *clamp_warnings = clamped;
  if (scored == 0) return 0.0;
  return -sum / static_cast<double>(scored);
}

}  // namespace segforge
