#include "gridvlad/vlad.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "gridvlad/binary_io.hpp"

namespace gridvlad {

namespace {

void check_dims(const DescriptorGrid& grid, const Codebook& codebook) {
  if (grid.dim() != codebook.dim()) {
    throw Error("dimension mismatch: grid D=" + std::to_string(grid.dim()) + ", codebook D=" +
                std::to_string(codebook.dim()));
  }
}

void add_residual(Vector& acc, const Codebook& codebook, std::span<const float> f, std::size_t k) {
  const std::size_t dim = codebook.dim();
  const auto center = codebook.centers().row(static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < dim; ++c) {
    acc[static_cast<Eigen::Index>(k * dim + c)] += static_cast<double>(f[c]) - center[static_cast<Eigen::Index>(c)];
  }
}

std::uint32_t method_code(Method m) {
  switch (m) {
    case Method::Lcd: return 0;
    case Method::Star: return 1;
    case Method::Dsar: return 2;
    case Method::Dstar: return 3;
  }
  return 0;
}

}  // namespace

std::vector<FrameRange> segment_bounds(std::size_t frames, std::size_t level) {
  const std::size_t parts = std::size_t{1} << level;
  const std::size_t base = frames / parts;
  const std::size_t extra = frames % parts;
  std::vector<FrameRange> out;
  out.reserve(parts);
  std::size_t begin = 0;
  for (std::size_t s = 0; s < parts; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    out.push_back({begin, begin + len});
    begin += len;
  }
  return out;
}

Vector encode_cell_segment(const DescriptorGrid& grid, const Codebook& codebook, std::size_t i,
                           std::size_t j, FrameRange range) {
  check_dims(grid, codebook);
  if (i >= grid.grid_size() || j >= grid.grid_size()) {
    throw Error("cell (" + std::to_string(i) + "," + std::to_string(j) + ") outside " +
                std::to_string(grid.grid_size()) + "x" + std::to_string(grid.grid_size()) + " grid");
  }
  if (range.begin > range.end || range.end > grid.frames()) {
    throw Error("frame range [" + std::to_string(range.begin) + "," + std::to_string(range.end) +
                ") outside video of " + std::to_string(grid.frames()) + " frames");
  }
  Vector u = Vector::Zero(static_cast<Eigen::Index>(codebook.size() * codebook.dim()));
  for (std::size_t t = range.begin; t < range.end; ++t) {
    const auto f = grid.descriptor(t, i, j);
    add_residual(u, codebook, f, codebook.assign(f));
  }
  return u;
}

void l2_normalize(Vector& v) {
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
}

void power_l2_normalize(Vector& v) {
  for (auto& x : v) x = std::copysign(std::sqrt(std::abs(x)), x);
  l2_normalize(v);
}

Vector normalize_vlad(const Vector& raw, std::size_t clusters) {
  if (clusters == 0 || raw.size() % static_cast<Eigen::Index>(clusters) != 0) {
    throw Error("VLAD length " + std::to_string(raw.size()) + " not divisible by K=" +
                std::to_string(clusters));
  }
  Vector v = raw;
  const Eigen::Index block = raw.size() / static_cast<Eigen::Index>(clusters);
  for (std::size_t k = 0; k < clusters; ++k) {
    auto seg = v.segment(static_cast<Eigen::Index>(k) * block, block);
    const double norm = seg.norm();
    if (norm > 0.0) seg /= norm;
  }
  power_l2_normalize(v);
  return v;
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Lcd: return "lcd";
    case Method::Star: return "star";
    case Method::Dsar: return "dsar";
    case Method::Dstar: return "dstar";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "lcd") return Method::Lcd;
  if (lower == "star") return Method::Star;
  if (lower == "dsar") return Method::Dsar;
  if (lower == "dstar") return Method::Dstar;
  throw Error("unknown method '" + std::string(name) + "' (expected lcd, star, dsar or dstar)");
}

void save_representation(const VideoRepresentation& rep, const std::filesystem::path& path) {
  io::BlobWriter out(path, "VRP1", 1);
  out.u32(method_code(rep.method));
  out.u32(static_cast<std::uint32_t>(rep.params.clusters));
  out.u32(static_cast<std::uint32_t>(rep.params.dim));
  out.u32(static_cast<std::uint32_t>(rep.params.n_sp));
  out.u32(static_cast<std::uint32_t>(rep.params.n_tmp));
  out.u32(static_cast<std::uint32_t>(rep.params.levels));
  out.u32(static_cast<std::uint32_t>(rep.vector.size()));
  out.f32s(std::span<const double>(rep.vector.data(), static_cast<std::size_t>(rep.vector.size())));
  out.finish();
}

VideoRepresentation load_representation(const std::filesystem::path& path) {
  io::BlobReader in(path, "VRP1");
  VideoRepresentation rep;
  const auto code = in.u32();
  if (code > 3) throw Error("'" + path.string() + "': malformed header (method tag " + std::to_string(code) + ")");
  constexpr Method methods[] = {Method::Lcd, Method::Star, Method::Dsar, Method::Dstar};
  rep.method = methods[code];
  rep.params.clusters = in.u32();
  rep.params.dim = in.u32();
  rep.params.n_sp = in.u32();
  rep.params.n_tmp = in.u32();
  rep.params.levels = in.u32();
  const std::size_t length = in.u32();
  const auto values = in.f32s(length);
  in.expect_end();
  rep.vector = Eigen::Map<const Eigen::VectorXf>(values.data(), static_cast<Eigen::Index>(length)).cast<double>();
  return rep;
}

VideoRepresentation encode_lcd(const DescriptorGrid& grid, const Codebook& codebook) {
  check_dims(grid, codebook);
  Vector u = Vector::Zero(static_cast<Eigen::Index>(codebook.size() * codebook.dim()));
  for (std::size_t n = 0; n < grid.descriptor_count(); ++n) {
    const auto f = grid.descriptor(n);
    add_residual(u, codebook, f, codebook.assign(f));
  }
  VideoRepresentation rep;
  rep.vector = normalize_vlad(u, codebook.size());
  rep.method = Method::Lcd;
  rep.params = {codebook.size(), codebook.dim(), 0, 0, 0};
  return rep;
}

PyramidVlads encode_pyramid(const DescriptorGrid& grid, const Codebook& codebook,
                            PyramidConfig config) {
  check_dims(grid, codebook);
  const std::size_t a = grid.grid_size();
  const std::size_t d = config.segment_count();
  const std::size_t feature = codebook.size() * codebook.dim();

  // Nearest center of every descriptor, computed once.
  std::vector<std::size_t> labels(grid.descriptor_count());
  for (std::size_t n = 0; n < labels.size(); ++n) labels[n] = codebook.assign(grid.descriptor(n));

  PyramidVlads out;
  out.grid_size = a;
  out.levels = config.levels;
  out.clusters = codebook.size();
  out.columns = Matrix::Zero(static_cast<Eigen::Index>(feature), static_cast<Eigen::Index>(a * a * d));

  Vector u(static_cast<Eigen::Index>(feature));
  for (std::size_t level = 0; level <= config.levels; ++level) {
    const auto ranges = segment_bounds(grid.frames(), level);
    for (std::size_t s = 0; s < ranges.size(); ++s) {
      const std::size_t seg = PyramidConfig::segment_index(level, s);
      for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = 0; j < a; ++j) {
          u.setZero();
          for (std::size_t t = ranges[s].begin; t < ranges[s].end; ++t) {
            const std::size_t n = (t * a + i) * a + j;
            add_residual(u, codebook, grid.descriptor(n), labels[n]);
          }
          out.columns.col(static_cast<Eigen::Index>(out.column(i * a + j, seg))) =
              normalize_vlad(u, codebook.size());
        }
      }
    }
  }
  return out;
}

}  // namespace gridvlad
