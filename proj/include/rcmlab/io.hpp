#pragma once
// File emission: CSV tables with a provenance comment line and %.17g numbers
// (round-trip exact, so byte-identical reruns are byte-identical files),
// JSON summaries, and binary snapshots for environments and kernel grids.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rcmlab/field.hpp"
#include "rcmlab/geometry.hpp"
#include "rcmlab/solver.hpp"

namespace rcmlab {

std::string format_g17(double v);

// Every CSV starts with "# config_hash=<hex> seed=<n>" then a header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& config_hash,
            uint64_t seed, const std::vector<std::string>& columns);
  ~CsvWriter();
  void row(const std::vector<double>& values);
  // Mixed row: already-formatted cells (used for integer ids alongside data).
  void raw_row(const std::string& line);
  void close();

 private:
  std::ofstream out_;
  size_t columns_ = 0;
};

void write_json_file(const std::string& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::string& path);

// ---------------------------------------------------------------------------
// Environment snapshot.
//
// Binary layout (little-endian): magic "RCME", u32 version, u32 d,
// i64 half_side, u64 seed, u32 law-string length, law string bytes, then
// site_count*d doubles: for each region site in index order, the d conductances
// of the edges (site, axis+).  CSV: x1..xd, y1..yd, mu.
struct EnvSnapshot {
  int d = 0;
  int64_t half_side = 0;
  uint64_t seed = 0;
  std::string law_desc;
  std::vector<double> edge_values;  // site-major, axis-minor
};

void write_env_binary(const std::string& path, const EnvView& env,
                      const LatticeRegion& region, uint64_t env_seed,
                      const std::string& law_desc);
EnvSnapshot read_env_binary(const std::string& path);
void write_env_csv(const std::string& path, const std::string& config_hash,
                   uint64_t seed, const EnvView& env,
                   const LatticeRegion& region);

// ---------------------------------------------------------------------------
// Kernel / Green grids.
//
// Binary layout: magic "RCMK", u32 version, u32 d, i64 half_side, u32 n_times,
// f64 tol, n_times f64 times, then n_times blocks of site_count doubles in
// region index order.  CSV rows: t, x1..xd, value (kernel) or x1..xd, value
// (green).
void write_kernel_binary(const std::string& path, const KernelField& kf,
                         double tol);
void write_kernel_csv(const std::string& path, const std::string& config_hash,
                      uint64_t seed, const KernelField& kf);
void write_green_csv(const std::string& path, const std::string& config_hash,
                     uint64_t seed, const GreenField& gf);

}  // namespace rcmlab
