#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wavecascade/coupling.hpp"
#include "wavecascade/plant.hpp"
#include "wavecascade/simulation.hpp"
#include "wavecascade/synthesis.hpp"

namespace wavecascade {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kVerifyFailed = 1;
inline constexpr int kConfigInvalid = 2;
inline constexpr int kKalman = 3;
inline constexpr int kCertificateExhausted = 4;
inline constexpr int kDivergence = 5;
inline constexpr int kUsage = 64;
inline constexpr int kNumerical = 70;  // rank/Θ verdict conflicts; not part of the contract
}  // namespace exit_code

/// Bad command-line arguments (exit 64) as opposed to a bad config file (exit 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One INI-style config file. Sections: plant, measurement, synthesis,
/// simulation, output. Unknown sections or keys are rejected.
struct RunConfig {
  PlantConfig plant;
  MeasurementSpec measurement = MeasurementSpec::dirichlet(0.5);

  int N0 = 1;
  std::vector<cplx> K_targets, L_targets;  // empty: δ-scaled defaults
  int N_max = 8, M_max = 16;
  CertificateParams certificate{CertificateParams::Mode::BoundedReal};
  int tail_cutoff = kDefaultTailCutoff;

  SimConfig sim;
  std::string y0 = "0", z0 = "0", z1 = "0", dz0;  // expressions in x, L, pi
  double fit_t1 = 1.0;
  std::optional<double> fit_t2;  // defaults to T
  int snapshot_points = 101;

  std::filesystem::path output_dir = ".";
  bool write_csv = true, write_json = true;
};

/// Parses and revalidates. Throws ConfigError with the offending key.
RunConfig parse_run_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Writes through a temporary next to `path`, then renames over it.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& body);

/// Entry point of the command-line tool. Commands: spectrum, gamma-scan,
/// synth, simulate, verify. Returns the process exit code; never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wavecascade
