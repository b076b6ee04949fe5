#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bbkd/phantom.hpp"
#include "bbkd/tensor.hpp"

namespace bbkd {

enum class Role { Paired, Unpaired, PseudoLabeled, Test };

std::string_view to_string(Role role) noexcept;
Role parse_role(std::string_view name);

struct ManifestItem {
  std::string id;
  Role role = Role::Paired;
  std::uint64_t phantom_seed = 0;
  std::filesystem::path ct;    // empty for unpaired items
  std::filesystem::path cbct;
  std::string source;          // pseudo-labeled: id of the unpaired item
};

/// Paths are absolute in memory and stored relative to the manifest's
/// directory on disk.
struct DatasetManifest {
  std::size_t image_size = 32;
  std::uint64_t seed = 0;
  double window_lo = 0.0;
  double window_hi = 1.0;
  DegradationConfig degradation;
  std::vector<ManifestItem> items;

  std::size_t count(Role role) const;
  std::vector<const ManifestItem*> with_role(Role role) const;
  std::vector<const ManifestItem*> with_roles(std::initializer_list<Role> roles) const;
};

/// Seed of the phantom behind item `index` of `role`; disjoint across roles.
std::uint64_t item_seed(std::uint64_t dataset_seed, Role role, std::size_t index);

DatasetManifest build_dataset(std::size_t n_paired, std::size_t n_unpaired, std::size_t n_test,
                              std::size_t size, const DegradationConfig& cfg,
                              std::uint64_t seed, const std::filesystem::path& out_dir);

std::string manifest_to_json(const DatasetManifest& manifest, const std::filesystem::path& dir);
DatasetManifest manifest_from_json(std::string_view text, const std::filesystem::path& dir);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
/// Validates counts, role disjointness and that every referenced file exists.
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace bbkd
