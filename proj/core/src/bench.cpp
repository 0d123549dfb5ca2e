#include "segforge/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "binio.hpp"

namespace segforge {

LatencyStats time_inference(const Graph& g, const std::map<std::string, Tensor>& inputs,
                            int warmup, int iters, const KernelChoice* choice,
                            const ExecOptions& opts) {
  if (iters < 1) throw std::invalid_argument("time_inference: iters must be >= 1");
  if (warmup < 0) throw std::invalid_argument("time_inference: warmup must be >= 0");

  LatencyStats stats;
  stats.warmup = warmup;
  stats.iters = iters;

  uint64_t hash = 0xcbf29ce484222325ull;
  for (int i = 0; i < warmup + iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto outputs = execute(g, inputs, choice, opts);
    const auto t1 = std::chrono::steady_clock::now();
    hash = 0xcbf29ce484222325ull;
    for (const auto& [name, t] : outputs) {
      hash ^= detail::fnv1a64(name);
      if (t.dtype == DType::Float32)
        hash ^= detail::fnv1a64(t.f32.data(), t.f32.size() * sizeof(float));
      else
        hash ^= detail::fnv1a64(t.q8.data(), t.q8.size());
    }
    if (i >= warmup)
      stats.ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  stats.output_hash = hash;

  std::vector<double> sorted = stats.ms;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  stats.median_ms = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double sum = 0.0;
  for (double v : sorted) sum += v;
  stats.mean_ms = sum / static_cast<double>(n);
  const size_t rank = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(n)));
  stats.p95_ms = sorted[rank == 0 ? 0 : rank - 1];
  return stats;
}

const char* power_log_format_name(PowerLogFormat f) {
  return f == PowerLogFormat::GpuSmiCsv ? "gpu-smi-csv" : "ina-sysfs";
}

std::optional<PowerLogFormat> power_log_format_from_name(const std::string& s) {
  if (s == "gpu-smi-csv") return PowerLogFormat::GpuSmiCsv;
  if (s == "ina-sysfs") return PowerLogFormat::InaSysfs;
  return std::nullopt;
}

namespace {

// Howard Hinnant's civil-days algorithm; UTC, no timezone database needed.
int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

// Accepts YYYY-MM-DDTHH:MM:SS with optional fractional seconds and optional
// trailing 'Z'. Returns seconds since the epoch.
std::optional<double> parse_iso8601(const std::string& s) {
  int y = 0;
  unsigned mo = 0, d = 0, hh = 0, mm = 0;
  double ss = 0.0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%d-%2u-%2uT%2u:%2u:%lf%n", &y, &mo, &d, &hh, &mm, &ss,
                  &consumed) != 6)
    return std::nullopt;
  std::string rest = s.substr(static_cast<size_t>(consumed));
  if (!rest.empty() && rest.back() == 'Z') rest.pop_back();
  if (!rest.empty()) return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mm > 59 || ss < 0.0 || ss >= 61.0)
    return std::nullopt;
  return static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 + hh * 3600.0 + mm * 60.0 + ss;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\r')) ++pos;
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace

PowerTrace parse_power_text(PowerLogFormat format, const std::string& text,
                            const std::string& what) {
  PowerTrace trace;
  trace.format = format;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    std::optional<PowerSample> sample;
    if (format == PowerLogFormat::GpuSmiCsv && fields.size() == 2) {
      const auto t = parse_iso8601(fields[0]);
      const auto w = parse_double(fields[1]);
      if (t && w && *w >= 0.0) sample = PowerSample{*t, *w};
    } else if (format == PowerLogFormat::InaSysfs && fields.size() == 4) {
      const auto t_ms = parse_double(fields[0]);
      const auto ma = parse_double(fields[1]);
      const auto mv = parse_double(fields[2]);
      const auto mw = parse_double(fields[3]);
      if (t_ms && ma && mv && mw && *mw >= 0.0)
        sample = PowerSample{*t_ms / 1000.0, *mw / 1000.0};
    }
    if (sample && (trace.samples.empty() || sample->t_seconds >= trace.samples.back().t_seconds))
      trace.samples.push_back(*sample);
    else
      ++trace.skipped_lines;
  }
  if (trace.samples.empty())
    throw std::runtime_error(what + ": no valid " +
                             std::string(power_log_format_name(format)) + " samples (" +
                             std::to_string(trace.skipped_lines) + " lines skipped)");
  return trace;
}

PowerTrace parse_power_log(PowerLogFormat format, const std::string& path) {
  return parse_power_text(format, detail::read_file(path), path);
}

double average_power(const PowerTrace& trace,
                     std::optional<std::pair<double, double>> window) {
  std::vector<const PowerSample*> in_window;
  for (const PowerSample& s : trace.samples)
    if (!window || (s.t_seconds >= window->first && s.t_seconds <= window->second))
      in_window.push_back(&s);
  if (in_window.empty()) throw std::runtime_error("average_power: no samples in window");

  const double duration = in_window.back()->t_seconds - in_window.front()->t_seconds;
  if (in_window.size() == 1 || duration <= 0.0) {
    double sum = 0.0;
    for (const PowerSample* s : in_window) sum += s->watts;
    return sum / static_cast<double>(in_window.size());
  }
  double area = 0.0;
  for (size_t i = 0; i + 1 < in_window.size(); ++i) {
    const double dt = in_window[i + 1]->t_seconds - in_window[i]->t_seconds;
    area += dt * 0.5 * (in_window[i]->watts + in_window[i + 1]->watts);
  }
  return area / duration;
}

double energy_wh(double n_images, double inference_ms, double power_w) {
  if (n_images < 0.0 || inference_ms < 0.0 || power_w < 0.0)
    throw std::invalid_argument("energy_wh: arguments must be >= 0");
  return n_images * inference_ms * power_w / 3.6e6;
}

void finalize_report(BenchReport& r) {
  r.energy_wh = energy_wh(r.n_images, r.latency.median_ms, r.power_w);
  r.images_per_s = r.latency.median_ms > 0.0 ? 1000.0 / r.latency.median_ms : 0.0;
  r.images_per_wh = r.energy_wh > 0.0 ? r.n_images / r.energy_wh : 0.0;
}

std::optional<ReportFormat> report_format_from_name(const std::string& s) {
  if (s == "text") return ReportFormat::Text;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown") return ReportFormat::Markdown;
  return std::nullopt;
}

namespace {

std::vector<std::string> report_cells(const BenchReport& r) {
  char buf[64];
  std::vector<std::string> cells;
  cells.push_back(r.model);
  cells.push_back(r.passes.empty() ? "none" : r.passes);
  std::snprintf(buf, sizeof(buf), "%.3f", r.size_mb);
  cells.push_back(buf);
  std::snprintf(buf, sizeof(buf), "%.3f", r.latency.median_ms);
  cells.push_back(buf);
  std::snprintf(buf, sizeof(buf), "%.3f", r.power_w);
  cells.push_back(buf);
  std::snprintf(buf, sizeof(buf), "%.6f", r.energy_wh);
  cells.push_back(buf);
  std::snprintf(buf, sizeof(buf), "%.3f", r.images_per_s);
  cells.push_back(buf);
  std::snprintf(buf, sizeof(buf), "%.3f", r.images_per_wh);
  cells.push_back(buf);
  return cells;
}

const char* kColumns[] = {"model",    "passes",    "size_MB",   "median_ms",
                          "power_W",  "energy_Wh", "img_per_s", "img_per_Wh"};

}  // namespace

std::string emit_report(const std::vector<BenchReport>& reports, ReportFormat format) {
  if (reports.empty()) throw std::invalid_argument("emit_report: no reports");
  const size_t ncols = 8;
  std::vector<std::vector<std::string>> rows;
  rows.reserve(reports.size());
  for (const BenchReport& r : reports) rows.push_back(report_cells(r));

  std::ostringstream os;
  if (format == ReportFormat::Csv) {
    for (size_t c = 0; c < ncols; ++c) os << (c ? "," : "") << kColumns[c];
    os << "\n";
    for (const auto& row : rows) {
      for (size_t c = 0; c < ncols; ++c) os << (c ? "," : "") << row[c];
      os << "\n";
    }
    return os.str();
  }

  std::vector<size_t> width(ncols);
  for (size_t c = 0; c < ncols; ++c) width[c] = std::string(kColumns[c]).size();
  for (const auto& row : rows)
    for (size_t c = 0; c < ncols; ++c) width[c] = std::max(width[c], row[c].size());

  auto emit_row = [&](const std::vector<std::string>& cells, const char* sep) {
    for (size_t c = 0; c < ncols; ++c) {
      if (format == ReportFormat::Markdown) os << "| ";
      os << cells[c] << std::string(width[c] - cells[c].size(), ' ');
      os << (format == ReportFormat::Markdown ? " " : sep);
    }
    if (format == ReportFormat::Markdown) os << "|";
    os << "\n";
  };

  std::vector<std::string> header(kColumns, kColumns + ncols);
  emit_row(header, "  ");
  if (format == ReportFormat::Markdown) {
    for (size_t c = 0; c < ncols; ++c) os << "|" << std::string(width[c] + 2, '-');
    os << "|\n";
  }
  for (const auto& row : rows) emit_row(row, "  ");
  return os.str();
}

}  // namespace segforge
