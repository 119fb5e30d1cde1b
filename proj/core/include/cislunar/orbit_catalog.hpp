#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cislunar/cr3bp.hpp"
#include "cislunar/types.hpp"

namespace cislunar {

enum class OrbitFamily { L1HaloN, L1HaloS, L2HaloN, L2HaloS, DRO, Dragonfly, Custom };

std::string_view to_string(OrbitFamily family);
/// Throws ValidationError for unknown names.
OrbitFamily orbit_family_from_string(std::string_view name);

/// Which symmetric-orbit corrector applies to a family.
enum class OrbitSymmetry {
  /// Perpendicular crossing of the x-z plane: x0 = (x, 0, z, 0, vy, 0).
  XZPlane,
  /// Planar orbit in z = 0: x0 = (x, 0, 0, 0, vy, 0).
  Planar,
};

OrbitSymmetry symmetry_of(OrbitFamily family);

struct OrbitMeta {
  std::optional<std::string> resonance;
  std::optional<std::string> source;
};

struct PeriodicOrbit {
  std::string name;
  OrbitFamily family = OrbitFamily::Custom;
  StateVector x0;
  double period = 0.0;
  double stability_index = 1.0;
  OrbitMeta meta;

  /// period > 0, finite state, stability_index >= 1 - 1e-9.
  void validate() const;
};

/// A periodic orbit together with the fraction of a period elapsed at the
/// scenario start epoch.
struct OrbitInstance {
  PeriodicOrbit orbit;
  double phase = 0.0;

  void validate() const;
};

/// Coordinate held fixed during a single-shooting correction.
enum class FixedParameter {
  X0,
  Z0,
  /// Keep the period; all initial-state coordinates move.
  Period,
};

struct CorrectionOptions {
  int max_iterations = 50;
  /// Perpendicular-crossing residual required for convergence.
  double tolerance = 1e-10;
  /// Newton keeps iterating while it still improves on this (tighter) level.
  double polish_tolerance = 1e-13;
  FixedParameter fixed = FixedParameter::X0;
  PropagationOptions propagation;
};

struct CorrectionResult {
  PeriodicOrbit orbit;
  int iterations = 0;
  double residual = 0.0;
};

/// Single-shooting Newton correction of a symmetric periodic orbit through
/// its half-period perpendicular crossing. Throws ConvergenceError after
/// max_iterations or on a singular correction matrix.
CorrectionResult differential_correct(const StateVector& guess, double half_period_guess, OrbitSymmetry symmetry,
                                      const Cr3bpParams& params, const CorrectionOptions& opts = {});

struct FamilyWalkOptions {
  double initial_step = 0.01;
  double max_step = 0.02;
  double min_step = 1e-7;
  int max_members = 5000;
  /// Initial walking direction along the family.
  bool increase_period = true;
  bool compute_stability = true;
};

/// Pseudo-arclength continuation along the family through `seed`. Each
/// corrected member is passed to `visit`; returning false stops the walk.
/// Turning points in period or any coordinate are passed through.
void walk_family(const PeriodicOrbit& seed, const FamilyWalkOptions& walk, const Cr3bpParams& params,
                 const std::function<bool(const PeriodicOrbit&)>& visit, const CorrectionOptions& opts = {});

/// Walks a family from `seed` to the member whose period equals
/// `target_period`: walks until the period is bracketed, then corrects at
/// fixed period from the interpolated state.
CorrectionResult continue_to_period(const PeriodicOrbit& seed, double target_period, const Cr3bpParams& params,
                                    double max_step = 0.02, const CorrectionOptions& opts = {});

/// Monodromy matrix phi(T, 0).
Matrix6 monodromy(const PeriodicOrbit& orbit, const Cr3bpParams& params, const PropagationOptions& opts = {});

std::vector<std::complex<double>> monodromy_eigenvalues(const PeriodicOrbit& orbit, const Cr3bpParams& params,
                                                        const PropagationOptions& opts = {});

/// max over monodromy eigenvalues of (|l| + 1/|l|) / 2; 1 for a linearly
/// stable orbit.
double stability_index(const PeriodicOrbit& orbit, const Cr3bpParams& params, const PropagationOptions& opts = {});
double stability_index_from_eigenvalues(const std::vector<std::complex<double>>& eigenvalues);

/// |flow(x0, T) - x0|
double periodicity_residual(const PeriodicOrbit& orbit, const Cr3bpParams& params,
                            const PropagationOptions& opts = {});

/// x0 propagated forward by phase * period; phase 0 returns x0 unchanged.
StateVector state_at_phase(const OrbitInstance& instance, const Cr3bpParams& params,
                           const PropagationOptions& opts = {});

/// JSON catalog: array of {name, family, x0[6], period, stability_index?,
/// meta{resonance?, source?}}. Throws ValidationError with the offending
/// record index and field.
std::vector<PeriodicOrbit> load_catalog(const std::filesystem::path& path);
std::vector<PeriodicOrbit> parse_catalog(std::string_view json_text);
std::string serialize_catalog(const std::vector<PeriodicOrbit>& catalog);
void save_catalog(const std::filesystem::path& path, const std::vector<PeriodicOrbit>& catalog);

/// The ten orbits behind the bundled three-observer, seven-target scenario,
/// each re-corrected at its tabulated period from a stored seed state.
std::vector<PeriodicOrbit> reference_catalog(const Cr3bpParams& params = {}, const CorrectionOptions& opts = {});

const PeriodicOrbit& find_orbit(const std::vector<PeriodicOrbit>& catalog, std::string_view name);

}  // namespace cislunar
