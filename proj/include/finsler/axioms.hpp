#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "finsler/connection.hpp"
#include "finsler/expr.hpp"
#include "finsler/geometry.hpp"
#include "finsler/types.hpp"

namespace finsler::ax {

// Seeded sampling on the slit tangent bundle: x uniform in a box, y uniform
// in direction with radius in [y_rmin, y_rmax]. Points failing the guard or
// the metric's non-degeneracy threshold are rejected and counted.
struct SamplePolicy {
  uint64_t seed = 1;
  int count = 50;
  std::vector<double> x_lo, x_hi;  // size n; defaults to [-1,1]^n when empty
  double y_rmin = 0.5, y_rmax = 2.0;
};

struct SampleSet {
  std::vector<BasePoint> points;
  int requested = 0;
  int rejected_guard = 0;
  int rejected_degenerate = 0;

  // more than half of the requested points failed to materialize
  bool pervasively_degenerate() const {
    return static_cast<int>(points.size()) * 2 < requested;
  }
};

SampleSet draw_samples(const dsl::LagrangianSpec&, const SamplePolicy&,
                       const geom::GeometryOptions& = {});

struct ConditionResult {
  std::string id;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  BasePoint worst;
  std::string note;
};

struct AxiomReport {
  std::string suite;
  std::string connection;
  std::string lagrangian;
  std::vector<ConditionResult> conditions;
  int samples_used = 0;
  int samples_skipped = 0;

  bool passed() const {
    for (const auto& c : conditions)
      if (!c.pass) return false;
    return true;
  }
  const ConditionResult* find(const std::string& id) const {
    for (const auto& c : conditions)
      if (c.id == id) return &c;
    return nullptr;
  }
};

struct CheckOptions {
  double tol = 1e-6;
  std::map<std::string, double> tol_override;  // per condition id
  int order = 5;
  bool parallel = true;

  double tolerance_for(const std::string& id) const {
    auto it = tol_override.find(id);
    return it != tol_override.end() ? it->second : tol;
  }
  geom::GeometryOptions geometry() const {
    geom::GeometryOptions g;
    g.order = order;
    return g;
  }
};

// Axiom suites ---------------------------------------------------------------

AxiomReport check_xkj(const conn::FinslerConnection&, const dsl::LagrangianSpec&, const SampleSet&,
                      const CheckOptions& = {});
AxiomReport check_chern(const conn::FinslerConnection&, const dsl::LagrangianSpec&,
                        const SampleSet&, const CheckOptions& = {});
AxiomReport check_abate(const conn::FinslerConnection&, const dsl::LagrangianSpec&,
                        const SampleSet&, const CheckOptions& = {});
AxiomReport check_cartan(const conn::FinslerConnection&, const dsl::LagrangianSpec&,
                         const SampleSet&, const CheckOptions& = {});
AxiomReport check_identities(const conn::FinslerConnection&, const dsl::LagrangianSpec&,
                             const SampleSet&, const CheckOptions& = {});
AxiomReport check_chp_symplectic(const conn::FinslerConnection&, const dsl::LagrangianSpec&,
                                 const SampleSet&, const CheckOptions& = {});

// Non-linear connection field for the compatibility check; defaults to the
// Barthel connection of the Lagrangian.
struct NField {
  std::string name = "barthel";
  bool is_barthel = true;
  std::function<geom::JetMat(const geom::Geometry&)> eval;  // null => Barthel
};
AxiomReport check_compatibility(const dsl::LagrangianSpec&, const NField&, const SampleSet&,
                                const CheckOptions& = {});

// Uniqueness probes: perturb the target catalogue connection by random
// admissible deformations and require that at least one characterizing
// condition fails by >= 10x tolerance.
struct ProbeReport {
  std::string suite;
  int trials = 0;
  int detected = 0;
  std::map<std::string, int> failing_conditions;  // id -> #trials it failed in
  bool passed() const { return trials > 0 && detected == trials; }
};
ProbeReport uniqueness_probe(conn::CatalogueKind target, const dsl::LagrangianSpec&,
                             const SampleSet&, int trials, uint64_t seed,
                             const CheckOptions& = {});

// Random deformation generators (seeded, deterministic). The W fields carry
// affine coefficient tables; admissible ones are projected so the lowered
// tensor is symmetric and y-annihilated in its first two slots.
conn::SymmetryW random_symmetry_w(int n, uint64_t seed, bool amplified = false);
// Cartan-probe V-shifts: totally symmetric or first-two-antisymmetric, always
// y-annihilated in every slot.
conn::FinslerConnection perturb_catalogue_v(conn::CatalogueKind base, int n, uint64_t seed,
                                            bool totally_symmetric);

// The characterization matrix: catalogue connections x suites, plus the
// canonical-metric-connection agreement distances against catalogue Cartan.
struct CompareCell {
  std::string connection, suite;
  bool pass = false;
  double worst_residual = 0.0;
  std::string worst_condition;
};
struct CompareReport {
  std::vector<CompareCell> cells;
  std::map<std::string, double> canonical_distance;  // connection -> distance to Cartan
  int samples_used = 0;
};
CompareReport compare_catalogue(const dsl::LagrangianSpec&, const SampleSet&,
                                const CheckOptions& = {});

}  // namespace finsler::ax
