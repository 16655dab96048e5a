#pragma once

#include "tmopfit/fields.hpp"
#include "tmopfit/fitting.hpp"
#include "tmopfit/objective.hpp"
#include "tmopfit/solver.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace tmopfit
{

/// sphere: |x - c| - 0.3; tg: four-lobed curve with r = 0.3 + 0.08 cos(4 theta);
/// rt: x_2 - (0.5 + 0.1 cos(2 pi x_1) + 0.02 cos(10 pi x_1)). c is the domain center.
/// In 3D tg is extruded along z and rt along y.
std::shared_ptr<const LevelSet> builtin_levelset(const std::string &name, int dim);

/// Mean squared distance of the marked nodes from the sphere |x - c| = r.
double compute_e_S(const Mesh &mesh, const NodeVector &x, const MarkedSet &S,
                   const Eigen::VectorXd &center, double radius);

struct InterfaceError
{
   double avg = 0.0;
   double max = 0.0;
};

/// Mean and max of |sigma| over the given marked-node values.
InterfaceError compute_E(const Eigen::VectorXd &sigma_at_marked);

/// Least-squares coefficients of the marked-node heights (last coordinate)
/// in the basis {1, cos(k_m pi x_1)}.
Eigen::VectorXd interface_modes(const Mesh &mesh, const NodeVector &x, const MarkedSet &S,
                                const std::vector<double> &wavenumbers);

enum class InterfaceMode
{
   Fit,     ///< nodes near sigma = 0 are pulled onto it
   Fixed,   ///< aligned interface nodes are held in place
   Relax    ///< aligned interface nodes slide, kept on sigma = 0 by the penalty
};

const char *to_string(InterfaceMode m);
InterfaceMode interface_mode_from_string(const std::string &s);

struct TestCase
{
   std::string name = "custom";
   int dim = 2;
   Geometry geometry = Geometry::Quad;
   int order = 3;
   int res = 8;
   std::string levelset = "sphere";
   MetricSpec metric{MetricId::Mu58};
   TargetKind target = TargetKind::IdealShapeUnitSize;
   double weight = 1000.0;
   InterfaceMode mode = InterfaceMode::Fit;
   bool discrete_sigma = true;   ///< sigma as a field on the initial mesh, else analytic
   PenaltyHessianMode hessian_mode = PenaltyHessianMode::Analytic;
   SolverConfig solver;
};

std::vector<std::string> case_names();
/// Throws invalid-argument for unknown names.
TestCase named_case(const std::string &name);

struct FitReport
{
   std::string case_name;
   double F0 = 0.0;
   double F_final = 0.0;
   double F_decrease_pct = 0.0;
   double e_S = 0.0;   ///< NaN unless the level set is a sphere
   double E_avg = 0.0;
   double E_max = 0.0;
   int iterations = 0;
   double wall_time_s = 0.0;
   std::string termination;
};

std::string to_json(const FitReport &r);
FitReport fit_report_from_json(const std::string &text);

struct CaseResult
{
   explicit CaseResult(MeshData m) : initial(std::move(m)) {}

   FitReport report;
   SolveReport solve;
   MeshData initial;   ///< mesh with attributes and the node positions the solve starts from
   NodeVector final_nodes;
   MarkedSet S;
   ScalarField sigma_initial;
   ScalarField sigma_final;   ///< sigma0 transferred to the final nodes
};

/// Builds, optimizes and measures a case. With a nonempty out_dir writes
/// mesh_initial.mesh, mesh_final.mesh, history.csv, report.json,
/// initial.vtu and final.vtu there. Progress lines go to log when given.
CaseResult run_case(const TestCase &tc, const std::string &out_dir = "", std::ostream *log = nullptr);

/// Unstructured grid with Lagrange cells, point data "sigma" and cell data
/// "attribute". Tets are supported up to order 3.
void write_vtu(std::ostream &os, const Mesh &mesh, const NodeVector &x, const ScalarField &sigma);
void write_vtu(const std::string &path, const Mesh &mesh, const NodeVector &x,
               const ScalarField &sigma);

/// Local node order of the VTK Lagrange cell: entry m is our local index of VTK point m.
std::vector<int> vtk_node_order(const NodalBasis &basis);
int vtk_cell_type(Geometry g);

} // namespace tmopfit
