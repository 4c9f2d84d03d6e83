#pragma once
// Shared plumbing for the experiment translation units: wall-clock timing,
// output paths, and the named site-function registry used by the space-average
// driver.  Internal to src/.

#include <chrono>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "rcmlab/config.hpp"
#include "rcmlab/experiments.hpp"

namespace rcmlab {
namespace detail {

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// out_dir/<name>, creating out_dir on first use.
inline std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

// Named test functions on the rescaled ball (arguments in macroscopic units).
inline SiteFunction site_function(const std::string& name, int d) {
  if (name == "one") return [](const double*) { return 1.0; };
  if (name == "gauss") {
    return [d](const double* x) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += x[i] * x[i];
      return std::exp(-s);
    };
  }
  if (name == "coord_sq") {
    return [](const double* x) { return x[0] * x[0]; };
  }
  if (name == "shifted_linear") {
    return [](const double* x) { return 1.0 + 0.5 * x[0]; };
  }
  throw std::runtime_error("config: unknown site function \"" + name +
                           "\" (expected one|gauss|coord_sq|shifted_linear)");
}

// Law description string for environment snapshot headers.
inline std::string law_desc(const LawConfig& law) {
  char buf[160];
  if (law.uniform > 0.0) {
    snprintf(buf, sizeof(buf), "d=%d,uniform=%.17g", law.d, law.uniform);
  } else {
    snprintf(buf, sizeof(buf), "d=%d,tail_c=%.17g,alpha=%.17g,rho=%.17g",
             law.d, law.tail_c, law.alpha, law.rho);
  }
  return std::string(buf);
}

}  // namespace detail
}  // namespace rcmlab
