#pragma once

#include <optional>
#include <string>
#include <vector>

#include "segforge/executor.hpp"
#include "segforge/graph.hpp"

namespace segforge {

struct LatencyStats {
  int warmup = 0;
  int iters = 0;
  std::vector<double> ms;  // post-warmup iterations only
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  uint64_t output_hash = 0;  // guards the measured work against elimination
};

// Wall-clock per-iteration timing of execute(). Measurement runs are
// single-threaded unless the caller opts in through `opts`.
LatencyStats time_inference(const Graph& g, const std::map<std::string, Tensor>& inputs,
                            int warmup, int iters, const KernelChoice* choice = nullptr,
                            const ExecOptions& opts = {});

enum class PowerLogFormat { GpuSmiCsv, InaSysfs };
const char* power_log_format_name(PowerLogFormat f);
std::optional<PowerLogFormat> power_log_format_from_name(const std::string& s);

struct PowerSample {
  double t_seconds = 0.0;
  double watts = 0.0;
};

struct PowerTrace {
  std::vector<PowerSample> samples;  // timestamps non-decreasing
  PowerLogFormat format = PowerLogFormat::GpuSmiCsv;
  int64_t skipped_lines = 0;
};

// gpu-smi-csv lines: `ISO8601timestamp,power.draw_W`
// ina-sysfs lines:   `epoch_ms,current_mA,voltage_mV,power_mW` (power -> W)
// Malformed lines are skipped and counted; zero valid samples is an error.
PowerTrace parse_power_log(PowerLogFormat format, const std::string& path);
PowerTrace parse_power_text(PowerLogFormat format, const std::string& text,
                            const std::string& what = "power log");

// Time-weighted (trapezoidal) mean over the optional [t0, t1] window.
double average_power(const PowerTrace& trace,
                     std::optional<std::pair<double, double>> window = std::nullopt);

// E(W.h) = n_images * inference_ms * power_w / 3.6e6.
double energy_wh(double n_images, double inference_ms, double power_w);

struct BenchReport {
  std::string model;
  std::string variant;
  std::string passes;
  double size_mb = 0.0;
  LatencyStats latency;
  double power_w = 0.0;
  double n_images = 0.0;
  double energy_wh = 0.0;
  double images_per_s = 0.0;
  double images_per_wh = 0.0;
  int threads = 1;
};

// Fills energy/throughput fields from the primary columns.
void finalize_report(BenchReport& r);

enum class ReportFormat { Text, Csv, Markdown };
std::optional<ReportFormat> report_format_from_name(const std::string& s);

// Stable column order: model, passes, size_MB, median_ms, power_W, energy_Wh,
// img_per_s, img_per_Wh.
std::string emit_report(const std::vector<BenchReport>& reports, ReportFormat format);

}  // namespace segforge
