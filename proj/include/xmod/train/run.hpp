#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmod/errors.hpp"

namespace xmod {

// Bookkeeping for one training invocation: config snapshot, loss log,
// checkpoints and wall-clock accounting.
struct TrainingRun {
  std::string run_id;
  nlohmann::ordered_json config;
  std::filesystem::path loss_csv;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<double> seconds_per_epoch;
  int64_t steps_per_epoch = 0;
  int64_t total_steps = 0;
  double total_seconds = 0.0;

  void save(const std::filesystem::path& path) const {
    nlohmann::ordered_json j;
    j["run_id"] = run_id;
    j["config"] = config;
    j["loss_csv"] = loss_csv.string();
    j["steps_per_epoch"] = steps_per_epoch;
    j["total_steps"] = total_steps;
    j["seconds_per_epoch"] = seconds_per_epoch;
    j["total_seconds"] = total_seconds;
    std::vector<std::string> cps;
    for (const auto& c : checkpoints) cps.push_back(c.string());
    j["checkpoints"] = cps;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << "\n";
  }
};

// Loss log rows carry the global 1-based step so resumed runs append with
// strictly increasing step numbers.
class LossCsv {
 public:
  LossCsv() = default;

  void open(const std::filesystem::path& path, const std::string& header, bool append) {
    const bool fresh = !append || !std::filesystem::exists(path);
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw DataError("cannot open loss log " + path.string());
    if (fresh) out_ << header << "\n";
  }

  template <class... Vals>
  void row(int64_t step, Vals... vals) {
    out_ << step;
    ((out_ << "," << format(vals)), ...);
    out_ << "\n";
    out_.flush();
  }

 private:
  static std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

  std::ofstream out_;
};

}  // namespace xmod
