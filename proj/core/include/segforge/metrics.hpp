#pragma once

#include <map>
#include <string>
#include <vector>

#include "segforge/tensor.hpp"

namespace segforge {

struct ClassDef {
  int id = 0;
  std::string name;
  std::string category;
  bool is_void = false;
};

// Class list with category grouping and void flags. Void classes never score:
// pixels whose ground truth is void are skipped entirely.
struct LabelSchema {
  std::vector<ClassDef> classes;

  int num_labels() const;  // max id + 1
  const ClassDef* find(int id) const;
  bool is_void(int id) const;
  std::vector<std::string> scored_categories() const;  // categories with >= 1 non-void class

  // The 35 Cityscapes classes (19 evaluated, 7 scored categories).
  static LabelSchema cityscapes();

  // Text format, one class per line: id,name,category,void_flag.
  // '#' comments and blank lines are allowed.
  static LabelSchema parse(const std::string& text);
  static LabelSchema load(const std::string& path);
  std::string serialize() const;
};

// Square pixel-count matrix indexed (ground-truth class, predicted class).
struct ConfusionMatrix {
  int n = 0;
  std::vector<int64_t> counts;  // n x n row-major

  explicit ConfusionMatrix(int n_classes = 0)
      : n(n_classes), counts(static_cast<size_t>(n_classes) * n_classes, 0) {}

  int64_t& at(int gt, int pred) { return counts[static_cast<size_t>(gt) * n + pred]; }
  int64_t at(int gt, int pred) const { return counts[static_cast<size_t>(gt) * n + pred]; }
  int64_t total() const;

  // Associative and commutative, so accumulation shards merge in any order.
  void merge(const ConfusionMatrix& other);
};

// Per-pixel tally of [H,W,1] label maps. Void ground-truth pixels are
// skipped; out-of-range labels raise an error naming the pixel.
void accumulate(ConfusionMatrix& cm, const Tensor& gt, const Tensor& pred,
                const LabelSchema& schema);

struct IouEntry {
  int id = 0;           // class id, or -1 for categories
  std::string name;
  double iou = 0.0;
  bool valid = false;   // false when TP+FP+FN == 0 (absent class)
};

struct IouResult {
  std::vector<IouEntry> entries;
  double mean = 0.0;    // over valid entries only
  int valid_count = 0;
};

// IoU_c = cm[c][c] / (row_c + col_c - cm[c][c]) over non-void classes.
IouResult class_iou(const ConfusionMatrix& cm, const LabelSchema& schema);

// Equivalent to relabeling scored pixels to categories and running class_iou;
// implemented by aggregating the class confusion matrix.
IouResult category_iou(const ConfusionMatrix& cm, const LabelSchema& schema);

// Numerically stable per-pixel channel softmax. Errors on non-finite logits.
Tensor softmax_probs(const Tensor& logits);

// loss = -(1/p) sum log f_i(y_i*) over scored pixels; zero probability is
// clamped at 1e-12 and counted in clamp_warnings when provided.
double cross_entropy_loss(const Tensor& probs, const Tensor& gt, const LabelSchema& schema,
                          int64_t* clamp_warnings = nullptr);

}  // namespace segforge
