#include "gridvlad/core_types.hpp"

#include <charconv>
#include <cmath>
#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "gridvlad/binary_io.hpp"

namespace gridvlad {

namespace {

constexpr std::uint32_t kDgtVersion = 1;

std::size_t checked_volume(std::size_t frames, std::size_t grid_size, std::size_t dim) {
  if (frames == 0 || grid_size == 0 || dim == 0) {
    throw Error("descriptor grid dimensions must be positive (T=" + std::to_string(frames) +
                ", a=" + std::to_string(grid_size) + ", D=" + std::to_string(dim) + ")");
  }
  return frames * grid_size * grid_size * dim;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

DescriptorGrid::DescriptorGrid(std::size_t frames, std::size_t grid_size, std::size_t dim)
    : frames_(frames),
      grid_size_(grid_size),
      dim_(dim),
      data_(checked_volume(frames, grid_size, dim), 0.0f) {}

DescriptorGrid::DescriptorGrid(std::size_t frames, std::size_t grid_size, std::size_t dim,
                               std::vector<float> data)
    : frames_(frames), grid_size_(grid_size), dim_(dim), data_(std::move(data)) {
  const std::size_t expected = checked_volume(frames, grid_size, dim);
  if (data_.size() != expected) {
    throw Error("payload mismatch: header implies " + std::to_string(expected) +
                " floats, got " + std::to_string(data_.size()));
  }
  for (std::size_t n = 0; n < data_.size(); ++n) {
    if (!std::isfinite(data_[n])) {
      throw Error("non-finite descriptor value at flat index " + std::to_string(n));
    }
  }
}

DescriptorGrid read_dgt(const std::filesystem::path& path) {
  io::BlobReader in(path, "DGT1");
  if (in.version() != kDgtVersion) {
    throw Error("'" + path.string() + "': malformed header (unsupported version " +
                std::to_string(in.version()) + ")");
  }
  if (in.remaining() < 3 * sizeof(std::uint32_t)) {
    throw Error("'" + path.string() + "': malformed header (truncated before T, a, D)");
  }
  const std::size_t frames = in.u32();
  const std::size_t grid_size = in.u32();
  const std::size_t dim = in.u32();
  std::size_t expected = 0;
  try {
    expected = checked_volume(frames, grid_size, dim);
  } catch (const Error& e) {
    throw Error("'" + path.string() + "': malformed header: " + e.what());
  }
  if (in.remaining() != expected * sizeof(float)) {
    throw Error("'" + path.string() + "': payload mismatch: header implies " +
                std::to_string(expected) + " floats, file holds " +
                std::to_string(in.remaining()) + " bytes");
  }
  auto data = in.f32s(expected);
  try {
    return DescriptorGrid(frames, grid_size, dim, std::move(data));
  } catch (const Error& e) {
    throw Error("'" + path.string() + "': " + e.what());
  }
}

void write_dgt(const DescriptorGrid& grid, const std::filesystem::path& path) {
  io::BlobWriter out(path, "DGT1", kDgtVersion);
  out.u32(static_cast<std::uint32_t>(grid.frames()));
  out.u32(static_cast<std::uint32_t>(grid.grid_size()));
  out.u32(static_cast<std::uint32_t>(grid.dim()));
  out.f32s(grid.data());
  out.finish();
}

Dataset load_dataset(const DatasetManifest& manifest) {
  Dataset ds;
  ds.manifest = manifest;
  ds.grids.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) {
    ds.grids.push_back(read_dgt(s.path));
    const auto& g = ds.grids.back();
    const auto& first = ds.grids.front();
    if (g.grid_size() != first.grid_size() || g.dim() != first.dim()) {
      throw Error("sample '" + s.sample_id + "': grid shape (a=" + std::to_string(g.grid_size()) +
                  ", D=" + std::to_string(g.dim()) + ") differs from the dataset's (a=" +
                  std::to_string(first.grid_size()) + ", D=" + std::to_string(first.dim()) + ")");
    }
  }
  return ds;
}

std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  if (dataset.grids.size() != dataset.manifest.samples.size()) {
    throw Error("dataset has " + std::to_string(dataset.grids.size()) + " grids for " +
                std::to_string(dataset.manifest.samples.size()) + " samples");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir / "grids", ec);
  if (ec) throw Error("cannot create '" + (dir / "grids").string() + "': " + ec.message());
  DatasetManifest out = dataset.manifest;
  for (std::size_t n = 0; n < out.samples.size(); ++n) {
    const auto rel = std::filesystem::path("grids") / (out.samples[n].sample_id + ".dgt");
    write_dgt(dataset.grids[n], dir / rel);
    out.samples[n].path = rel;
  }
  const auto manifest_path = dir / "manifest.tsv";
  write_manifest(out, manifest_path);
  return manifest_path;
}

Matrix collect_descriptors(std::span<const DescriptorGrid* const> grids, std::size_t cap,
                           std::uint64_t seed) {
  if (grids.empty()) throw Error("no grids to collect descriptors from");
  const std::size_t dim = grids.front()->dim();
  std::size_t total = 0;
  for (const auto* g : grids) {
    if (g->dim() != dim) {
      throw Error("inconsistent descriptor dimension across grids (" + std::to_string(dim) +
                  " vs " + std::to_string(g->dim()) + ")");
    }
    total += g->descriptor_count();
  }
  std::vector<std::size_t> picks;
  if (cap == 0 || total <= cap) {
    picks.resize(total);
    std::iota(picks.begin(), picks.end(), std::size_t{0});
  } else {
    // Selection sampling: each index is kept with probability
    // (still needed) / (still available), which yields an ordered uniform subset.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    picks.reserve(cap);
    for (std::size_t idx = 0; idx < total && picks.size() < cap; ++idx) {
      const double needed = static_cast<double>(cap - picks.size());
      if (u(rng) * static_cast<double>(total - idx) < needed) picks.push_back(idx);
    }
  }
  Matrix out(static_cast<Eigen::Index>(picks.size()), static_cast<Eigen::Index>(dim));
  std::size_t grid_index = 0;
  std::size_t grid_start = 0;
  for (std::size_t r = 0; r < picks.size(); ++r) {
    while (picks[r] >= grid_start + grids[grid_index]->descriptor_count()) {
      grid_start += grids[grid_index]->descriptor_count();
      ++grid_index;
    }
    const auto d = grids[grid_index]->descriptor(picks[r] - grid_start);
    for (std::size_t k = 0; k < dim; ++k) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = d[k];
  }
  return out;
}

std::vector<std::size_t> DatasetManifest::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(classes, 0)), 0);
  for (const auto& s : samples) {
    if (s.class_label >= 1 && s.class_label <= classes) ++counts[s.class_label - 1];
  }
  return counts;
}

void validate_manifest(DatasetManifest& manifest) {
  if (manifest.classes < 0) throw Error("class count must be non-negative");
  std::unordered_set<std::string> seen;
  for (const auto& s : manifest.samples) {
    if (s.sample_id.empty()) throw Error("empty sample_id");
    if (!seen.insert(s.sample_id).second) throw Error("duplicate sample_id '" + s.sample_id + "'");
    if (s.class_label < 1 || s.class_label > manifest.classes) {
      throw Error("sample '" + s.sample_id + "': label " + std::to_string(s.class_label) +
                  " out of range 1.." + std::to_string(manifest.classes));
    }
    if (s.group_id.empty()) throw Error("sample '" + s.sample_id + "': empty group_id");
  }
  if (!manifest.samples.empty()) {
    const auto counts = manifest.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0) {
        manifest.warnings.push_back("class " + std::to_string(c + 1) + " has no samples");
      }
    }
  }
}

DatasetManifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  const auto base = path.parent_path();

  DatasetManifest manifest;
  int declared = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      constexpr std::string_view key = "classes:";
      if (body.rfind(key, 0) == 0) {
        const auto value = trim(body.substr(key.size()));
        int c = 0;
        const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), c);
        if (ec != std::errc() || p != value.data() + value.size() || c < 0) {
          throw Error(path.string() + ":" + std::to_string(line_no) + ": bad class count '" +
                      value + "'");
        }
        declared = c;
      }
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      throw Error(path.string() + ":" + std::to_string(line_no) +
                  ": missing field (expected 4 tab-separated fields, got " +
                  std::to_string(fields.size()) + ")");
    }
    SampleMeta s;
    s.sample_id = trim(fields[0]);
    const auto p = trim(fields[1]);
    const auto label = trim(fields[2]);
    s.group_id = trim(fields[3]);
    if (s.sample_id.empty() || p.empty() || label.empty() || s.group_id.empty()) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": missing field");
    }
    const auto [end, ec] = std::from_chars(label.data(), label.data() + label.size(), s.class_label);
    if (ec != std::errc() || end != label.data() + label.size()) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": bad class label '" + label +
                  "'");
    }
    s.path = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base / p;
    manifest.samples.push_back(std::move(s));
  }

  if (declared >= 0) {
    manifest.classes = declared;
  } else {
    for (const auto& s : manifest.samples) manifest.classes = std::max(manifest.classes, s.class_label);
  }
  validate_manifest(manifest);
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "# classes: " << manifest.classes << "\n";
  out << "# sample_id\tpath\tclass_label\tgroup_id\n";
  for (const auto& s : manifest.samples) {
    out << s.sample_id << '\t' << s.path.generic_string() << '\t' << s.class_label << '\t'
        << s.group_id << '\n';
  }
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace gridvlad
