#include "rcmlab/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace rcmlab {
namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("io: " + msg);
}

void write_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ofstream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_i64(std::ofstream& out, int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t read_u32(std::ifstream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
uint64_t read_u64(std::ifstream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
int64_t read_i64(std::ifstream& in) {
  int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
double read_f64(std::ifstream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::string provenance_line(const std::string& config_hash, uint64_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "# config_hash=%s seed=%" PRIu64,
                config_hash.c_str(), seed);
  return buf;
}

}  // namespace

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& config_hash,
                     uint64_t seed, const std::vector<std::string>& columns)
    : out_(path), columns_(columns.size()) {
  if (!out_) fail("cannot open \"" + path + "\" for writing");
  out_ << provenance_line(config_hash, seed) << "\n";
  for (size_t i = 0; i < columns.size(); ++i)
    out_ << columns[i] << (i + 1 < columns.size() ? "," : "");
  out_ << "\n";
}

CsvWriter::~CsvWriter() { close(); }

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_)
    fail("csv row width " + std::to_string(values.size()) +
         " does not match header width " + std::to_string(columns_));
  for (size_t i = 0; i < values.size(); ++i)
    out_ << format_g17(values[i]) << (i + 1 < values.size() ? "," : "");
  out_ << "\n";
}

void CsvWriter::raw_row(const std::string& line) { out_ << line << "\n"; }

void CsvWriter::close() {
  if (out_.is_open()) out_.close();
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) fail("cannot open \"" + path + "\" for writing");
  out << doc.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open \"" + path + "\"");
  nlohmann::json doc;
  in >> doc;
  return doc;
}

// ---------------------------------------------------------------------------

static constexpr uint32_t kEnvVersion = 1;
static constexpr uint32_t kGridVersion = 1;

void write_env_binary(const std::string& path, const EnvView& env,
                      const LatticeRegion& region, uint64_t env_seed,
                      const std::string& law_desc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open \"" + path + "\" for writing");
  out.write("RCME", 4);
  write_u32(out, kEnvVersion);
  write_u32(out, uint32_t(region.d));
  write_i64(out, region.half_side);
  write_u64(out, env_seed);
  write_u32(out, uint32_t(law_desc.size()));
  out.write(law_desc.data(), std::streamsize(law_desc.size()));
  for (int64_t i = 0; i < region.site_count(); ++i) {
    Point x = region.site_at(i);
    for (int axis = 0; axis < region.d; ++axis)
      write_f64(out, env.edge_value(Edge{x, axis}));
  }
  if (!out) fail("short write to \"" + path + "\"");
}

EnvSnapshot read_env_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open \"" + path + "\"");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RCME", 4) != 0)
    fail("\"" + path + "\" is not an environment snapshot");
  uint32_t version = read_u32(in);
  if (version != kEnvVersion)
    fail("unsupported environment snapshot version " + std::to_string(version));
  EnvSnapshot snap;
  snap.d = int(read_u32(in));
  snap.half_side = read_i64(in);
  snap.seed = read_u64(in);
  uint32_t len = read_u32(in);
  snap.law_desc.resize(len);
  in.read(snap.law_desc.data(), len);
  int64_t side = 2 * snap.half_side + 1;
  int64_t sites = 1;
  for (int i = 0; i < snap.d; ++i) sites *= side;
  snap.edge_values.resize(size_t(sites) * size_t(snap.d));
  in.read(reinterpret_cast<char*>(snap.edge_values.data()),
          std::streamsize(snap.edge_values.size() * sizeof(double)));
  if (!in) fail("truncated environment snapshot \"" + path + "\"");
  return snap;
}

void write_env_csv(const std::string& path, const std::string& config_hash,
                   uint64_t seed, const EnvView& env,
                   const LatticeRegion& region) {
  std::vector<std::string> cols;
  for (int i = 0; i < region.d; ++i) cols.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < region.d; ++i) cols.push_back("y" + std::to_string(i + 1));
  cols.push_back("mu");
  CsvWriter csv(path, config_hash, seed, cols);
  std::vector<double> row(size_t(2 * region.d) + 1);
  for (int64_t i = 0; i < region.site_count(); ++i) {
    Point x = region.site_at(i);
    for (int axis = 0; axis < region.d; ++axis) {
      Point y = offset(x, axis, +1);
      for (int k = 0; k < region.d; ++k) {
        row[size_t(k)] = double(x.c[k]);
        row[size_t(region.d + k)] = double(y.c[k]);
      }
      row[size_t(2 * region.d)] = env.edge_value(Edge{x, axis});
      csv.row(row);
    }
  }
}

void write_kernel_binary(const std::string& path, const KernelField& kf,
                         double tol) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open \"" + path + "\" for writing");
  out.write("RCMK", 4);
  write_u32(out, kGridVersion);
  write_u32(out, uint32_t(kf.box.d));
  write_i64(out, kf.box.half_side);
  write_u32(out, uint32_t(kf.times.size()));
  write_f64(out, tol);
  for (double t : kf.times) write_f64(out, t);
  for (const auto& grid : kf.values)
    out.write(reinterpret_cast<const char*>(grid.data()),
              std::streamsize(grid.size() * sizeof(double)));
  if (!out) fail("short write to \"" + path + "\"");
}

void write_kernel_csv(const std::string& path, const std::string& config_hash,
                      uint64_t seed, const KernelField& kf) {
  std::vector<std::string> cols = {"t"};
  for (int i = 0; i < kf.box.d; ++i) cols.push_back("x" + std::to_string(i + 1));
  cols.push_back("p");
  CsvWriter csv(path, config_hash, seed, cols);
  std::vector<double> row(size_t(kf.box.d) + 2);
  for (size_t ti = 0; ti < kf.times.size(); ++ti) {
    row[0] = kf.times[ti];
    for (int64_t i = 0; i < kf.box.site_count(); ++i) {
      Point x = kf.box.site_at(i);
      for (int k = 0; k < kf.box.d; ++k) row[size_t(1 + k)] = double(x.c[k]);
      row[size_t(kf.box.d) + 1] = kf.values[ti][size_t(i)];
      csv.row(row);
    }
  }
}

void write_green_csv(const std::string& path, const std::string& config_hash,
                     uint64_t seed, const GreenField& gf) {
  std::vector<std::string> cols;
  for (int i = 0; i < gf.box.d; ++i) cols.push_back("x" + std::to_string(i + 1));
  cols.push_back("g");
  CsvWriter csv(path, config_hash, seed, cols);
  std::vector<double> row(size_t(gf.box.d) + 1);
  for (int64_t i = 0; i < gf.box.site_count(); ++i) {
    Point x = gf.box.site_at(i);
    for (int k = 0; k < gf.box.d; ++k) row[size_t(k)] = double(x.c[k]);
    row[size_t(gf.box.d)] = gf.values[size_t(i)];
    csv.row(row);
  }
}

}  // namespace rcmlab
