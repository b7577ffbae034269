#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "pitransfer/numeric_text.hpp"
#include "pitransfer/simulator.hpp"

namespace pitransfer {

enum class SourceKind { kinematic, surrogate };

std::string_view to_string(SourceKind s);
SourceKind parse_source(std::string_view text);

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManeuverRecord {
  VehicleSpec vehicle;
  ManeuverInput inputs;
  FinalPose outcome;
  SourceKind source = SourceKind::kinematic;

  friend bool operator==(const ManeuverRecord&, const ManeuverRecord&) = default;
};

/// Identity of a record inside a study: vehicle plus the grid inputs. Grids
/// never repeat an input tuple for the same vehicle.
struct RecordKey {
  std::string vehicle;
  double v_i, a, delta, mu, g;

  static RecordKey of(const ManeuverRecord& r);
  friend auto operator<=>(const RecordKey&, const RecordKey&) = default;
};

struct Dataset {
  std::vector<ManeuverRecord> records;
  std::string provenance;
  std::uint64_t seed = 0;
  SourceKind source = SourceKind::kinematic;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

class VehicleRegistry {
 public:
  VehicleRegistry() = default;
  explicit VehicleRegistry(std::vector<VehicleSpec> specs);

  /// The small, long and large vehicles used throughout the study.
  static VehicleRegistry defaults();

  /// Lines of `name, l, Nf, Nr`; a header line starting with `name` and
  /// `#` comments are ignored. Section markers `[vehicles]` are skipped.
  static VehicleRegistry parse(std::string_view text);

  const std::vector<VehicleSpec>& vehicles() const { return specs_; }
  const VehicleSpec& at(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::size_t size() const { return specs_.size(); }

 private:
  std::vector<VehicleSpec> specs_;
};

/// Grid axes of the kinematic study.
std::vector<double> kinematic_speeds();
std::vector<double> kinematic_accelerations(double g = kStandardGravity);
std::vector<double> kinematic_steering();

/// 50 x 10 x 11 braking grid simulated with the kinematic model.
Dataset kinematic_grid(const VehicleSpec& v, double step = 0.0);

/// 3 x 6 x 10 x 3 friction/speed/braking/steering grid through the surrogate.
Dataset surrogate_grid(const VehicleSpec& v, std::uint64_t seed,
                       const SurrogateOptions& opts = {});

/// Per-record noise seed derived from the dataset seed.
std::uint64_t record_seed(std::uint64_t seed, std::string_view vehicle, std::uint64_t index);

/// Seeded shuffle split into (train, test). train gets round(n * fraction)
/// records, clamped so both sides are nonempty when n >= 2.
std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed);

/// Concatenation in argument order; all inputs must share a source kind.
Dataset merge(std::span<const Dataset> parts);

inline constexpr std::string_view kCsvHeader =
    "vehicle,v_i,a,delta,mu,g,l,Nf,Nr,X,Y,theta,source";

void write_csv(const Dataset& d, std::ostream& out);
Dataset read_csv(std::istream& in);

/// Writes `path` plus a `path.meta.json` sidecar holding provenance and seed.
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace pitransfer
