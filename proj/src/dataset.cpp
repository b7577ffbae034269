#include "pitransfer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace pitransfer {

std::string_view to_string(SourceKind s) {
  return s == SourceKind::kinematic ? "kinematic" : "surrogate";
}

SourceKind parse_source(std::string_view text) {
  if (text == "kinematic") return SourceKind::kinematic;
  if (text == "surrogate") return SourceKind::surrogate;
  throw DatasetError("unknown source '" + std::string(text) + "' (expected kinematic or surrogate)");
}

RecordKey RecordKey::of(const ManeuverRecord& r) {
  return {r.vehicle.name, r.inputs.v_i, r.inputs.a, r.inputs.delta, r.inputs.mu, r.inputs.g};
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

VehicleRegistry::VehicleRegistry(std::vector<VehicleSpec> specs) : specs_(std::move(specs)) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    specs_[i].validate();
    for (std::size_t j = 0; j < i; ++j)
      if (specs_[j].name == specs_[i].name)
        throw DatasetError("duplicate vehicle '" + specs_[i].name + "'");
  }
}

VehicleRegistry VehicleRegistry::defaults() {
  return VehicleRegistry({{"small", 0.345, 37.77, 28.84},
                          {"long", 0.853, 22.74, 52.89},
                          {"large", 0.475, 71.12, 71.12}});
}

VehicleRegistry VehicleRegistry::parse(std::string_view text) {
  std::vector<VehicleSpec> specs;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty() || t.front() == '[') continue;
    std::string body = t;
    // `name = l, Nf, Nr` is accepted as well as `name, l, Nf, Nr`.
    if (auto eq = body.find('='); eq != std::string::npos) body[eq] = ',';
    auto fields = split_commas(body);
    if (fields.size() == 4 && fields[0] == "name") continue;
    if (fields.size() != 4)
      throw DatasetError("vehicle line " + std::to_string(lineno) + ": expected name, l, Nf, Nr");
    try {
      specs.push_back({fields[0], parse_double(fields[1]), parse_double(fields[2]),
                       parse_double(fields[3])});
    } catch (const std::invalid_argument& e) {
      throw DatasetError("vehicle line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (specs.empty()) throw DatasetError("no vehicles declared");
  try {
    return VehicleRegistry(std::move(specs));
  } catch (const ManeuverError& e) {
    throw DatasetError(e.what());
  }
}

const VehicleSpec& VehicleRegistry::at(std::string_view name) const {
  for (const auto& s : specs_)
    if (s.name == name) return s;
  throw DatasetError("unknown vehicle '" + std::string(name) + "'");
}

bool VehicleRegistry::contains(std::string_view name) const {
  return std::any_of(specs_.begin(), specs_.end(), [&](const VehicleSpec& s) { return s.name == name; });
}

std::vector<double> kinematic_speeds() {
  std::vector<double> out;
  for (int k = 1; k <= 50; ++k) out.push_back(k / 10.0);
  return out;
}

std::vector<double> kinematic_accelerations(double g) {
  std::vector<double> out;
  for (int k = 1; k <= 10; ++k) out.push_back(-(k * g) / 10.0);
  return out;
}

std::vector<double> kinematic_steering() {
  std::vector<double> out;
  for (int k = 0; k <= 10; ++k) out.push_back(k * 0.7854 / 10.0);
  return out;
}

Dataset kinematic_grid(const VehicleSpec& v, double step) {
  v.validate();
  if (step <= 0.0) step = calibrated_step();
  Dataset d;
  d.source = SourceKind::kinematic;
  d.provenance = "kinematic bicycle grid, vehicle " + v.name + ", RK4 step " + format_double(step);
  const auto accels = kinematic_accelerations();
  const auto steering = kinematic_steering();
  for (double speed : kinematic_speeds())
    for (double a : accels)
      for (double delta : steering) {
        ManeuverInput in{speed, a, delta, 0.0, kStandardGravity};
        d.records.push_back({v, in, simulate_kinematic(v, in, step), SourceKind::kinematic});
      }
  return d;
}

std::uint64_t record_seed(std::uint64_t seed, std::string_view vehicle, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : vehicle) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed ^ h) + index);
}

Dataset surrogate_grid(const VehicleSpec& v, std::uint64_t seed, const SurrogateOptions& opts) {
  v.validate();
  Dataset d;
  d.source = SourceKind::surrogate;
  d.seed = seed;
  d.provenance = "synthetic friction-limited surrogate (not measured data), vehicle " + v.name +
                 ", noise seed " + std::to_string(seed);
  const double frictions[] = {0.2, 0.4, 0.9};
  const double steering[] = {0.0, 0.3927, 0.7854};
  std::uint64_t index = 0;
  for (double mu : frictions)
    for (int s = 0; s < 6; ++s) {
      const double speed = (2 + s) / 2.0;
      for (int k = 1; k <= 10; ++k) {
        const double a = -(k * kStandardGravity) / 10.0;
        for (double delta : steering) {
          ManeuverInput in{speed, a, delta, mu, kStandardGravity};
          d.records.push_back({v, in, simulate_dynamic_surrogate(v, in, record_seed(seed, v.name, index), opts),
                               SourceKind::surrogate});
          ++index;
        }
      }
    }
  return d;
}

std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw DatasetError("train fraction must lie strictly between 0 and 1");
  const std::size_t n = d.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  Dataset train{{}, d.provenance + " | train split", seed, d.source};
  Dataset test{{}, d.provenance + " | test split", seed, d.source};
  train.records.reserve(n_train);
  test.records.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) (i < n_train ? train : test).records.push_back(d.records[idx[i]]);
  return {std::move(train), std::move(test)};
}

Dataset merge(std::span<const Dataset> parts) {
  if (parts.empty()) throw DatasetError("nothing to merge");
  Dataset out;
  out.source = parts.front().source;
  out.seed = parts.front().seed;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.source != out.source) throw DatasetError("cannot merge datasets from different sources");
    total += p.size();
  }
  if (parts.size() == 1) return parts.front();
  out.records.reserve(total);
  out.provenance = "merged:";
  for (const auto& p : parts) {
    out.records.insert(out.records.end(), p.records.begin(), p.records.end());
    out.provenance += " [" + p.provenance + "]";
  }
  return out;
}

void write_csv(const Dataset& d, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : d.records) {
    const auto& in = r.inputs;
    out << r.vehicle.name << ',' << format_double(in.v_i) << ',' << format_double(in.a) << ','
        << format_double(in.delta) << ',' << format_double(in.mu) << ',' << format_double(in.g) << ','
        << format_double(r.vehicle.wheelbase_l) << ',' << format_double(r.vehicle.front_normal_Nf) << ','
        << format_double(r.vehicle.rear_normal_Nr) << ',' << format_double(r.outcome.X) << ','
        << format_double(r.outcome.Y) << ',' << format_double(r.outcome.theta) << ','
        << to_string(r.source) << '\n';
  }
}

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader)
    throw DatasetError("missing or unexpected CSV header (expected '" + std::string(kCsvHeader) + "')");
  Dataset d;
  bool first = true;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_commas(line);
    if (f.size() != 13)
      throw DatasetError("CSV line " + std::to_string(lineno) + ": expected 13 fields, got " +
                         std::to_string(f.size()));
    try {
      ManeuverRecord r;
      r.vehicle = {f[0], parse_double(f[6]), parse_double(f[7]), parse_double(f[8])};
      r.inputs = {parse_double(f[1]), parse_double(f[2]), parse_double(f[3]), parse_double(f[4]),
                  parse_double(f[5])};
      r.outcome = {parse_double(f[9]), parse_double(f[10]), parse_double(f[11])};
      r.source = parse_source(f[12]);
      if (first) d.source = r.source;
      if (r.source != d.source) throw DatasetError("mixed sources in one file");
      first = false;
      d.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DatasetError("CSV line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetError("cannot write " + path.string());
    write_csv(d, out);
    if (!out) throw DatasetError("write failed for " + path.string());
  }
  nlohmann::json meta{{"provenance", d.provenance},
                      {"seed", d.seed},
                      {"source", std::string(to_string(d.source))},
                      {"records", d.size()}};
  std::ofstream out(path.string() + ".meta.json", std::ios::binary);
  out << meta.dump(2) << '\n';
  if (!out) throw DatasetError("write failed for " + path.string() + ".meta.json");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  Dataset d = read_csv(in);
  std::ifstream meta_in(path.string() + ".meta.json");
  if (meta_in) {
    const auto meta = nlohmann::json::parse(meta_in);
    d.provenance = meta.value("provenance", "");
    d.seed = meta.value("seed", std::uint64_t{0});
    if (d.empty()) d.source = parse_source(meta.value("source", "kinematic"));
  } else {
    d.provenance = "loaded from " + path.string();
  }
  return d;
}

}  // namespace pitransfer
