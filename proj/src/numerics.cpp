#include "babilab/numerics.hpp"

#include <algorithm>
#include <cstring>

namespace babilab {

GradCheckReport grad_check(const LossFn& loss_fn, ParameterStore<double>& params,
                           size_t max_coordinates, double h, uint64_t seed) {
  params.zero_grads();
  loss_fn(params);
  // Snapshot analytic gradients; the probe calls below overwrite them.
  std::vector<Mat<double>> analytic;
  for (const auto& e : params.entries()) analytic.push_back(e.grad);

  // Enumerate coordinates and subsample if there are too many.
  std::vector<std::pair<size_t, Eigen::Index>> coords;
  for (size_t p = 0; p < params.size(); ++p)
    for (Eigen::Index i = 0; i < params.entries()[p].value.size(); ++i)
      coords.emplace_back(p, i);
  Rng rng(mix_seed(seed ^ 0x67726164ull));
  rng.shuffle(coords);
  if (coords.size() > max_coordinates) coords.resize(max_coordinates);

  GradCheckReport report;
  report.checked = coords.size();
  for (auto [p, i] : coords) {
    auto& e = params.entries()[p];
    double* slot = e.value.data() + i;
    const double orig = *slot;
    *slot = orig + h;
    params.zero_grads();
    const double lp = loss_fn(params);
    *slot = orig - h;
    params.zero_grads();
    const double lm = loss_fn(params);
    *slot = orig;
    const double numeric = (lp - lm) / (2.0 * h);
    const double an = analytic[p](i);
    const double rel = std::abs(an - numeric) /
                       std::max({std::abs(an), std::abs(numeric), 1e-8});
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_parameter = e.name;
    }
  }
  // Restore analytic gradients for the caller.
  for (size_t p = 0; p < params.size(); ++p) params.entries()[p].grad = analytic[p];
  return report;
}

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, uint64_t v) {
  write_u32(out, static_cast<uint32_t>(v));
  write_u32(out, static_cast<uint32_t>(v >> 32));
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw NumericError("truncated stream while reading u32");
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

uint64_t read_u64(std::istream& in) {
  uint64_t lo = read_u32(in);
  uint64_t hi = read_u32(in);
  return lo | hi << 32;
}

std::string read_string(std::istream& in) {
  uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw NumericError("truncated stream while reading string");
  return s;
}

void write_parameters(std::ostream& out, const ParameterStore<float>& params) {
  write_u32(out, static_cast<uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    write_string(out, e.name);
    write_u32(out, static_cast<uint32_t>(e.value.rows()));
    write_u32(out, static_cast<uint32_t>(e.value.cols()));
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(e.value.data()),
              std::streamsize(sizeof(float)) * e.value.size());
  }
}

void read_parameters(std::istream& in, ParameterStore<float>& params) {
  const uint32_t count = read_u32(in);
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(in);
    const uint32_t rows = read_u32(in);
    const uint32_t cols = read_u32(in);
    Mat<float>& m = params.add(name, rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(float)) * m.size());
    if (!in) throw NumericError("truncated parameter payload for " + name);
  }
}

}  // namespace babilab
