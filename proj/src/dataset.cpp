#include "bbkd/dataset.hpp"

#include <cstdio>
#include <json.hpp>
#include <set>

#include "bbkd/error.hpp"
#include "bbkd/io.hpp"
#include "bbkd/rng.hpp"

namespace bbkd {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kManifestVersion = 1;

std::string item_id(Role role, std::size_t index) {
  char buf[48];
  const char* prefix = role == Role::Paired     ? "paired"
                       : role == Role::Unpaired ? "unpaired"
                       : role == Role::Test     ? "test"
                                                : "pseudo";
  std::snprintf(buf, sizeof buf, "%s_%04zu", prefix, index);
  return buf;
}

std::string relative_to(const fs::path& p, const fs::path& dir) {
  if (p.empty()) return {};
  return fs::relative(fs::absolute(p), fs::absolute(dir)).generic_string();
}

void validate(const DatasetManifest& m) {
  std::set<std::string> ids;
  std::set<std::uint64_t> seeds_by_role[4];
  for (const ManifestItem& it : m.items) {
    require(ids.insert(it.id).second, ErrorKind::Format, "manifest: duplicate item id " + it.id);
    if (it.role != Role::PseudoLabeled)
      seeds_by_role[static_cast<int>(it.role)].insert(it.phantom_seed);
    require(!it.cbct.empty(), ErrorKind::Format, "manifest: item " + it.id + " has no CBCT path");
    require(it.role == Role::Unpaired || !it.ct.empty(), ErrorKind::Format,
            "manifest: item " + it.id + " has no CT path");
  }
  const Role real[] = {Role::Paired, Role::Unpaired, Role::Test};
  for (Role a : real)
    for (Role b : real)
      if (a < b)
        for (std::uint64_t s : seeds_by_role[static_cast<int>(a)])
          require(!seeds_by_role[static_cast<int>(b)].contains(s), ErrorKind::Format,
                  "manifest: phantom seed shared between roles " + std::string(to_string(a)) +
                      " and " + std::string(to_string(b)));
}

}  // namespace

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::Paired: return "paired";
    case Role::Unpaired: return "unpaired";
    case Role::PseudoLabeled: return "pseudo-labeled";
    case Role::Test: return "test";
  }
  return "unknown";
}

Role parse_role(std::string_view name) {
  for (Role r : {Role::Paired, Role::Unpaired, Role::PseudoLabeled, Role::Test})
    if (to_string(r) == name) return r;
  fail(ErrorKind::Format, "unknown role '" + std::string(name) + "'");
}

std::size_t DatasetManifest::count(Role role) const {
  std::size_t n = 0;
  for (const auto& it : items) n += it.role == role;
  return n;
}

std::vector<const ManifestItem*> DatasetManifest::with_role(Role role) const {
  return with_roles({role});
}

std::vector<const ManifestItem*> DatasetManifest::with_roles(std::initializer_list<Role> roles) const {
  std::vector<const ManifestItem*> out;
  for (const auto& it : items)
    for (Role r : roles)
      if (it.role == r) out.push_back(&it);
  return out;
}

std::uint64_t item_seed(std::uint64_t dataset_seed, Role role, std::size_t index) {
  const std::uint64_t lane = static_cast<std::uint64_t>(role) + 1;
  return Rng::mix(Rng::mix(dataset_seed) ^ Rng::mix((lane << 40) ^ index));
}

DatasetManifest build_dataset(std::size_t n_paired, std::size_t n_unpaired, std::size_t n_test,
                              std::size_t size, const DegradationConfig& cfg,
                              std::uint64_t seed, const fs::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec && fs::is_directory(out_dir), ErrorKind::Io,
          "cannot create output directory " + out_dir.string());

  DatasetManifest m;
  m.image_size = size;
  m.seed = seed;
  m.degradation = cfg;
  const std::pair<Role, std::size_t> plan[] = {
      {Role::Paired, n_paired}, {Role::Unpaired, n_unpaired}, {Role::Test, n_test}};
  for (const auto& [role, count] : plan) {
    for (std::size_t i = 0; i < count; ++i) {
      ManifestItem it;
      it.id = item_id(role, i);
      it.role = role;
      it.phantom_seed = item_seed(seed, role, i);
      const Tensor pct = generate_phantom(it.phantom_seed, size);
      const Tensor cbct = degrade_to_cbct(pct, cfg, Rng::mix(it.phantom_seed ^ 0xcbc7ULL));
      it.cbct = out_dir / "cbct" / (it.id + ".imgf");
      write_imgf(normalize_intensity(cbct, m.window_lo, m.window_hi), it.cbct);
      // Unpaired CBCTs have no CT counterpart in the data set.
      if (role != Role::Unpaired) {
        it.ct = out_dir / "ct" / (it.id + ".imgf");
        write_imgf(normalize_intensity(pct, m.window_lo, m.window_hi), it.ct);
      }
      m.items.push_back(std::move(it));
    }
  }
  validate(m);
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

std::string manifest_to_json(const DatasetManifest& m, const fs::path& dir) {
  ordered_json j;
  j["format"] = "bbkd-manifest";
  j["version"] = kManifestVersion;
  j["image_size"] = m.image_size;
  j["seed"] = m.seed;
  j["normalization_window"] = {m.window_lo, m.window_hi};
  j["degradation"] = {{"n_views", m.degradation.n_views},
                      {"cupping_amplitude", m.degradation.cupping_amplitude},
                      {"noise_sigma", m.degradation.noise_sigma},
                      {"contrast_scale", m.degradation.contrast_scale}};
  j["n_paired"] = m.count(Role::Paired);
  j["n_unpaired"] = m.count(Role::Unpaired);
  j["n_test"] = m.count(Role::Test);
  j["n_pseudo_labeled"] = m.count(Role::PseudoLabeled);
  ordered_json items = ordered_json::array();
  for (const auto& it : m.items) {
    ordered_json e;
    e["id"] = it.id;
    e["role"] = to_string(it.role);
    e["phantom_seed"] = it.phantom_seed;
    e["ct"] = it.ct.empty() ? ordered_json(nullptr) : ordered_json(relative_to(it.ct, dir));
    e["cbct"] = relative_to(it.cbct, dir);
    if (!it.source.empty()) e["source"] = it.source;
    items.push_back(std::move(e));
  }
  j["items"] = std::move(items);
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text, const fs::path& dir) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
    require(j.value("format", "") == "bbkd-manifest", ErrorKind::Format, "not a bbkd manifest");
    require(j.at("version").get<int>() == kManifestVersion, ErrorKind::Format,
            "unsupported manifest version");
    DatasetManifest m;
    m.image_size = j.at("image_size").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.window_lo = j.at("normalization_window").at(0).get<double>();
    m.window_hi = j.at("normalization_window").at(1).get<double>();
    const auto& d = j.at("degradation");
    m.degradation = {d.at("n_views").get<int>(), d.at("cupping_amplitude").get<double>(),
                     d.at("noise_sigma").get<double>(), d.at("contrast_scale").get<double>()};
    for (const auto& e : j.at("items")) {
      ManifestItem it;
      it.id = e.at("id").get<std::string>();
      it.role = parse_role(e.at("role").get<std::string>());
      it.phantom_seed = e.at("phantom_seed").get<std::uint64_t>();
      if (!e.at("ct").is_null()) it.ct = (dir / e.at("ct").get<std::string>()).lexically_normal();
      it.cbct = (dir / e.at("cbct").get<std::string>()).lexically_normal();
      if (e.contains("source")) it.source = e.at("source").get<std::string>();
      m.items.push_back(std::move(it));
    }
    const std::pair<const char*, Role> counts[] = {{"n_paired", Role::Paired},
                                                   {"n_unpaired", Role::Unpaired},
                                                   {"n_test", Role::Test},
                                                   {"n_pseudo_labeled", Role::PseudoLabeled}};
    for (const auto& [key, role] : counts)
      require(j.at(key).get<std::size_t>() == m.count(role), ErrorKind::Format,
              std::string("manifest: ") + key + " does not match the item list");
    validate(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("manifest: ") + e.what());
  }
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  write_file(path, manifest_to_json(manifest, path.parent_path()));
}

DatasetManifest load_manifest(const fs::path& path) {
  DatasetManifest m = manifest_from_json(read_file(path), path.parent_path());
  for (const auto& it : m.items) {
    require(fs::exists(it.cbct), ErrorKind::Io, "manifest item " + it.id + ": missing " + it.cbct.string());
    require(it.ct.empty() || fs::exists(it.ct), ErrorKind::Io,
            "manifest item " + it.id + ": missing " + it.ct.string());
  }
  return m;
}

}  // namespace bbkd
