#include "tmopfit/app.hpp"

#include "tmopfit/error.hpp"
#include "tmopfit/transfer.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>

namespace tmopfit
{

std::shared_ptr<const LevelSet> builtin_levelset(const std::string &name, int dim)
{
   if (dim != 2 && dim != 3) { throw Error(ErrorKind::InvalidArgument, "level sets are 2D or 3D"); }
   const Eigen::VectorXd c = Eigen::VectorXd::Constant(dim, 0.5);
   if (name == "sphere") { return std::make_shared<SphereLevelSet>(c, 0.3); }
   if (name == "tg")
   {
      auto curve = std::make_shared<LobedLevelSet>(Eigen::Vector2d(0.5, 0.5), 0.3, 0.08);
      if (dim == 2) { return curve; }
      return std::make_shared<ExtrudedLevelSet>(curve, std::array<int, 2>{0, 1});
   }
   if (name == "rt")
   {
      auto graph = std::make_shared<SinusoidLevelSet>(
         0.5, std::vector<SinusoidLevelSet::Mode>{{0.1, 2.0}, {0.02, 10.0}});
      if (dim == 2) { return graph; }
      return std::make_shared<ExtrudedLevelSet>(graph, std::array<int, 2>{0, 2});
   }
   throw Error(ErrorKind::InvalidArgument, "unknown level set '" + name + "'");
}

double compute_e_S(const Mesh &mesh, const NodeVector &x, const MarkedSet &S,
                   const Eigen::VectorXd &center, double radius)
{
   if (S.empty()) { throw Error(ErrorKind::EmptyMarkedSet, "e_S needs marked nodes"); }
   double sum = 0.0;
   for (int s : S)
   {
      const double r = (node_position(mesh, x, s) - center).norm() - radius;
      sum += r * r;
   }
   return sum / static_cast<double>(S.size());
}

InterfaceError compute_E(const Eigen::VectorXd &sigma_at_marked)
{
   if (sigma_at_marked.size() == 0)
   {
      throw Error(ErrorKind::EmptyMarkedSet, "interface error needs marked nodes");
   }
   InterfaceError e;
   e.avg = sigma_at_marked.cwiseAbs().mean();
   e.max = sigma_at_marked.cwiseAbs().maxCoeff();
   return e;
}

Eigen::VectorXd interface_modes(const Mesh &mesh, const NodeVector &x, const MarkedSet &S,
                                const std::vector<double> &wavenumbers)
{
   const int m = static_cast<int>(wavenumbers.size()) + 1;
   if (static_cast<int>(S.size()) < m)
   {
      throw Error(ErrorKind::EmptyMarkedSet, "too few marked nodes for the mode fit");
   }
   Eigen::MatrixXd B(S.size(), m);
   Eigen::VectorXd h(S.size());
   for (std::size_t r = 0; r < S.size(); r++)
   {
      const Eigen::VectorXd p = node_position(mesh, x, S[r]);
      B(r, 0) = 1.0;
      for (int k = 1; k < m; k++) { B(r, k) = std::cos(wavenumbers[k - 1] * M_PI * p(0)); }
      h(r) = p(p.size() - 1);
   }
   return B.colPivHouseholderQr().solve(h);
}

const char *to_string(InterfaceMode m)
{
   switch (m)
   {
      case InterfaceMode::Fit: return "fit";
      case InterfaceMode::Fixed: return "fixed";
      case InterfaceMode::Relax: return "relax";
   }
   return "?";
}

InterfaceMode interface_mode_from_string(const std::string &s)
{
   if (s == "fit") { return InterfaceMode::Fit; }
   if (s == "fixed") { return InterfaceMode::Fixed; }
   if (s == "relax") { return InterfaceMode::Relax; }
   throw Error(ErrorKind::InvalidArgument, "unknown interface mode '" + s + "'");
}

std::vector<std::string> case_names()
{
   return {"fit2d-quad", "fit2d-tri", "fit3d-hex", "fit3d-tet", "tg2d", "tg3d", "rt2d", "rt3d"};
}

TestCase named_case(const std::string &name)
{
   TestCase tc;
   tc.name = name;
   if (name == "fit2d-quad" || name == "fit2d-tri")
   {
      tc.geometry = name == "fit2d-quad" ? Geometry::Quad : Geometry::Triangle;
      return tc;
   }
   if (name == "fit3d-hex" || name == "fit3d-tet")
   {
      tc.dim = 3;
      tc.geometry = name == "fit3d-hex" ? Geometry::Hex : Geometry::Tet;
      tc.order = 2;
      tc.metric = MetricSpec{MetricId::Mu333};
      tc.target = TargetKind::IdealShapeInitialSize;
      tc.discrete_sigma = false;
      return tc;
   }
   if (name == "tg2d" || name == "tg3d" || name == "rt2d" || name == "rt3d")
   {
      const bool three = name.back() == 'd' && name[name.size() - 2] == '3';
      tc.dim = three ? 3 : 2;
      tc.geometry = three ? Geometry::Hex : Geometry::Quad;
      tc.levelset = name.substr(0, 2);
      tc.metric = MetricSpec{three ? MetricId::Mu333 : MetricId::Mu80};
      tc.target = TargetKind::IdealShapeInitialSize;
      tc.mode = InterfaceMode::Relax;
      tc.discrete_sigma = !three;
      if (tc.levelset == "tg")
      {
         tc.order = three ? 2 : 3;
         tc.res = three ? 6 : 8;
         tc.weight = 1000.0;
      }
      else
      {
         tc.order = 2;
         tc.res = three ? 8 : 16;
         tc.weight = 1e4;
      }
      return tc;
   }
   throw Error(ErrorKind::InvalidArgument, "unknown case '" + name + "'");
}

std::string to_json(const FitReport &r)
{
   auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
   nlohmann::json j;
   j["case"] = r.case_name;
   j["F0"] = num(r.F0);
   j["F_final"] = num(r.F_final);
   j["F_decrease_pct"] = num(r.F_decrease_pct);
   j["e_S"] = num(r.e_S);
   j["E_avg"] = num(r.E_avg);
   j["E_max"] = num(r.E_max);
   j["iterations"] = r.iterations;
   j["wall_time_s"] = num(r.wall_time_s);
   j["termination"] = r.termination;
   return j.dump(2);
}

FitReport fit_report_from_json(const std::string &text)
{
   nlohmann::json j;
   try
   {
      j = nlohmann::json::parse(text);
   }
   catch (const nlohmann::json::exception &e)
   {
      throw Error(ErrorKind::ParseError, std::string("report json: ") + e.what());
   }
   auto num = [&](const char *key)
   {
      if (!j.contains(key)) { throw Error(ErrorKind::ParseError, std::string("report json: missing ") + key); }
      return j[key].is_null() ? std::numeric_limits<double>::quiet_NaN() : j[key].get<double>();
   };
   FitReport r;
   r.case_name = j.value("case", "");
   r.F0 = num("F0");
   r.F_final = num("F_final");
   r.F_decrease_pct = num("F_decrease_pct");
   r.e_S = num("e_S");
   r.E_avg = num("E_avg");
   r.E_max = num("E_max");
   r.iterations = j.value("iterations", 0);
   r.wall_time_s = num("wall_time_s");
   r.termination = j.value("termination", "");
   return r;
}

namespace
{

constexpr double kPrefitWeight = 1e5;
constexpr int kPrefitIterations = 60;

/// Closest point on the zero set along the natural coordinate of each level set.
Eigen::VectorXd snap(const LevelSet &ls, const Eigen::VectorXd &p)
{
   if (auto s = dynamic_cast<const SphereLevelSet *>(&ls))
   {
      const Eigen::VectorXd d = p - s->center();
      return s->center() + s->radius() * d.normalized();
   }
   if (auto l = dynamic_cast<const LobedLevelSet *>(&ls))
   {
      const Eigen::VectorXd d = p - l->center();
      return l->center() + l->radius_along(d) * d.normalized();
   }
   throw Error(ErrorKind::InvalidArgument, "no snapping rule for level set " + ls.kind());
}

/// Velocity tangent to the level sets of a 2D sigma, vanishing on the unit box boundary.
Eigen::VectorXd swirl_velocity(const LevelSet &ls, const Eigen::VectorXd &p)
{
   const int d = static_cast<int>(p.size());
   const Eigen::VectorXd g = ls.gradient(p);
   const double gn = g.norm();
   Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
   if (gn < 1e-12) { return v; }
   v << -g(1), g(0);
   double bump = 1.0;
   for (int a = 0; a < d; a++) { bump *= std::sin(M_PI * std::clamp(p(a), 0.0, 1.0)); }
   return bump * v / gn;
}

/// Moves interior nodes along the level sets of sigma for unit time at speed
/// `amp`, by RK4, so the interface keeps its shape while the elements shear.
NodeVector swirl(const Mesh &mesh, const NodeVector &x, const LevelSet &ls, double amp,
                 const std::set<int> &fixed)
{
   NodeVector y = x;
   const int steps = 20;
   const double dt = amp / steps;
   for (int i = 0; i < mesh.num_nodes(); i++)
   {
      if (fixed.count(i)) { continue; }
      Eigen::VectorXd p = node_position(mesh, x, i);
      for (int s = 0; s < steps; s++)
      {
         const Eigen::VectorXd k1 = swirl_velocity(ls, p);
         const Eigen::VectorXd k2 = swirl_velocity(ls, p + 0.5 * dt * k1);
         const Eigen::VectorXd k3 = swirl_velocity(ls, p + 0.5 * dt * k2);
         const Eigen::VectorXd k4 = swirl_velocity(ls, p + dt * k3);
         p += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      }
      set_node_position(mesh, y, i, p);
   }
   return y;
}

void snap_nodes(const Mesh &mesh, NodeVector &x, const LevelSet &ls, const MarkedSet &S)
{
   for (int s : S) { set_node_position(mesh, x, s, snap(ls, node_position(mesh, x, s))); }
}

void log_line(std::ostream *log, const std::string &s)
{
   if (log) { *log << s << std::endl; }
}

NodeVector align_interface_2d(MeshData &md, const LevelSet &ls, const TestCase &tc,
                              const QuadratureRule &quad, MarkedSet &S, std::ostream *log);

/// 3D meshes take the aligned 2D mesh of the base curve and extrude it.
NodeVector align_interface_3d(MeshData &md, const ExtrudedLevelSet &ls, const TestCase &tc,
                              const QuadratureRule &quad, MarkedSet &S, std::ostream *log)
{
   TestCase tc2 = tc;
   tc2.dim = 2;
   tc2.geometry = Geometry::Quad;
   if (!metric_defined_in(tc2.metric.id, 2)) { tc2.metric = MetricSpec{MetricId::Mu80}; }
   MeshData md2 = make_cartesian(2, tc.res, tc.order, Geometry::Quad);
   MarkedSet S2;
   const NodeVector x2 = align_interface_2d(md2, ls.base(), tc2, quadrature_for(Geometry::Quad, tc.order), S2, log);

   auto key = [](double a, double b) { return std::make_pair(std::llround(a * 1e9), std::llround(b * 1e9)); };
   std::map<std::pair<long long, long long>, int> lattice;
   for (int i = 0; i < md2.mesh.num_nodes(); i++)
   {
      const Eigen::VectorXd p = node_position(md2.mesh, md2.nodes, i);
      lattice[key(p(0), p(1))] = i;
   }

   Mesh &mesh = md.mesh;
   NodeVector x = md.nodes;
   const auto &ax = ls.axes();
   for (int i = 0; i < mesh.num_nodes(); i++)
   {
      Eigen::VectorXd p = node_position(mesh, md.nodes, i);
      const auto it = lattice.find(key(p(ax[0]), p(ax[1])));
      if (it == lattice.end()) { throw Error(ErrorKind::InvalidArgument, "extrusion: node off the 2D lattice"); }
      const Eigen::VectorXd q = node_position(md2.mesh, x2, it->second);
      p(ax[0]) = q(0);
      p(ax[1]) = q(1);
      set_node_position(mesh, x, i, p);
   }
   if (!is_valid(mesh, x, quad).valid)
   {
      throw Error(ErrorKind::NonpositiveDeterminant, "extruded interface mesh is invalid");
   }
   const ScalarField sigma = project(ls, mesh, x);
   S = mark_interface_nodes(mesh, x, sigma);
   for (int s : S)
   {
      if (std::abs(sigma.coeffs(s)) > 1e-8)
      {
         throw Error(ErrorKind::InvalidArgument, "extruded attributes do not follow the interface");
      }
   }
   return x;
}

/// Builds an initial mesh whose attribute interface lies on sigma = 0 and
/// whose elements are sheared along the level sets.
NodeVector align_interface(MeshData &md, const LevelSet &ls, const TestCase &tc,
                           const QuadratureRule &quad, MarkedSet &S, std::ostream *log)
{
   if (md.mesh.dim() == 2) { return align_interface_2d(md, ls, tc, quad, S, log); }
   if (auto e = dynamic_cast<const ExtrudedLevelSet *>(&ls)) { return align_interface_3d(md, *e, tc, quad, S, log); }
   throw Error(ErrorKind::InvalidArgument, "3D interface alignment needs an extruded level set");
}

/// Maps the node layer y = 1/2 of the Cartesian mesh onto the graph y = h(x),
/// stretching each column linearly below and above it.
NodeVector stretch_to_graph(MeshData &md, const SinusoidLevelSet &g, const QuadratureRule &quad,
                            MarkedSet &S, std::ostream *log)
{
   const Mesh &mesh = md.mesh;
   NodeVector x = md.nodes;
   bool layer = false;
   for (int i = 0; i < mesh.num_nodes(); i++)
   {
      Eigen::VectorXd p = node_position(mesh, md.nodes, i);
      const double h = g.height(p(0)), y = p(1);
      layer = layer || std::abs(y - 0.5) < 1e-12;
      p(1) = y <= 0.5 ? 2.0 * y * h : h + 2.0 * (y - 0.5) * (1.0 - h);
      set_node_position(mesh, x, i, p);
   }
   if (!layer) { throw Error(ErrorKind::InvalidArgument, "graph interface needs a node layer at y = 1/2"); }
   if (!is_valid(mesh, x, quad).valid)
   {
      throw Error(ErrorKind::NonpositiveDeterminant, "stretching onto the graph inverted the mesh");
   }
   S = mark_interface_nodes(md.mesh, x, project(g, mesh, x));
   log_line(log, "graph stretch: " + std::to_string(S.size()) + " interface nodes");
   return x;
}

NodeVector align_interface_2d(MeshData &md, const LevelSet &ls, const TestCase &tc,
                              const QuadratureRule &quad, MarkedSet &S, std::ostream *log)
{
   if (auto g = dynamic_cast<const SinusoidLevelSet *>(&ls)) { return stretch_to_graph(md, *g, quad, S, log); }
   Mesh &mesh = md.mesh;
   S = mark_interface_nodes(mesh, md.nodes, project(ls, mesh, md.nodes));
   const std::vector<int> bdr = mesh.boundary_nodes();
   const std::set<int> fixed(bdr.begin(), bdr.end());

   Objective pre(mesh, make_targets(mesh, md.nodes, tc.target, quad), quad, tc.metric);
   const std::shared_ptr<const LevelSet> view(&ls, [](const LevelSet *) {});
   auto pen = std::make_shared<FittingPenalty>(mesh, pre.targets(), quad, S, kPrefitWeight,
                                               std::make_shared<AnalyticSigma>(view));
   pre.set_penalty(pen);
   pre.fix_nodes(bdr);
   SolverConfig cfg;
   cfg.max_iterations = kPrefitIterations;
   NodeVector x = md.nodes;
   const SolveReport r = solve(pre, x, cfg);
   log_line(log, "prefit: " + std::to_string(r.iterations) + " iterations, " + to_string(r.reason));

   snap_nodes(mesh, x, ls, S);
   if (!is_valid(mesh, x, quad).valid)
   {
      throw Error(ErrorKind::NonpositiveDeterminant, "snapping the prefit interface inverted the mesh");
   }

   // largest shear up to 0.6 element widths that keeps the mesh valid
   const double h = 1.0 / tc.res;
   for (double amp = 0.6 * h; amp > 1e-3 * h; amp *= 0.5)
   {
      NodeVector y = swirl(mesh, x, ls, amp, fixed);
      snap_nodes(mesh, y, ls, S);
      if (is_valid(mesh, y, quad).valid)
      {
         log_line(log, "shear amplitude " + std::to_string(amp / h) + " h");
         return y;
      }
   }
   return x;
}

} // namespace

CaseResult run_case(const TestCase &tc, const std::string &out_dir, std::ostream *log)
{
   const auto t0 = std::chrono::steady_clock::now();
   if (!metric_defined_in(tc.metric.id, tc.dim))
   {
      throw Error(ErrorKind::InvalidArgument,
                  to_string(tc.metric.id) + " is not defined in " + std::to_string(tc.dim) + "D");
   }
   if (dimension(tc.geometry) != tc.dim)
   {
      throw Error(ErrorKind::InvalidArgument, "case geometry does not match its dimension");
   }
   CaseResult res(make_cartesian(tc.dim, tc.res, tc.order, tc.geometry));
   Mesh &mesh = res.initial.mesh;
   const auto ls = builtin_levelset(tc.levelset, tc.dim);
   const QuadratureRule quad = quadrature_for(tc.geometry, tc.order);

   if (tc.mode == InterfaceMode::Fit)
   {
      res.S = mark_interface_nodes(mesh, res.initial.nodes, project(*ls, mesh, res.initial.nodes));
   }
   else
   {
      res.initial.nodes = align_interface(res.initial, *ls, tc, quad, res.S, log);
   }
   const NodeVector &x0 = res.initial.nodes;
   res.sigma_initial = project(*ls, mesh, x0);

   Objective obj(mesh, make_targets(mesh, x0, tc.target, quad), quad, tc.metric);
   std::shared_ptr<const SigmaSource> source;
   if (tc.discrete_sigma) { source = std::make_shared<DiscreteSigma>(mesh, x0, res.sigma_initial); }
   else { source = std::make_shared<AnalyticSigma>(ls); }
   if (tc.mode != InterfaceMode::Fixed)
   {
      obj.set_penalty(std::make_shared<FittingPenalty>(mesh, obj.targets(), quad, res.S, tc.weight, source),
                      tc.hessian_mode);
   }
   obj.fix_nodes(mesh.boundary_nodes());
   if (tc.mode == InterfaceMode::Fixed) { obj.fix_nodes(res.S); }

   const Locator initial_index(mesh, x0);
   res.final_nodes = x0;
   res.sigma_final = res.sigma_initial;
   res.solve = solve(obj, res.final_nodes, tc.solver,
                     [&](const NodeVector &x, const IterationRecord &rec)
                     {
                        if (rec.iter > 0) { res.sigma_final = transfer_field(res.sigma_initial, initial_index, mesh, x); }
                        if (log)
                        {
                           *log << "iter " << rec.iter << "  F " << rec.F << "  Fmu " << rec.Fmu
                                << "  Fsigma " << rec.Fsigma << "  |g| " << rec.gradnorm
                                << "  step " << rec.step << "  mindet " << rec.mindet << std::endl;
                        }
                     });

   FitReport &rep = res.report;
   rep.case_name = tc.name;
   rep.F0 = res.solve.history.front().F;
   rep.F_final = res.solve.history.back().F;
   rep.F_decrease_pct = rep.F0 > 0.0 ? 100.0 * (rep.F0 - rep.F_final) / rep.F0 : 0.0;
   rep.iterations = res.solve.iterations;
   rep.termination = to_string(res.solve.reason);
   if (auto s = dynamic_cast<const SphereLevelSet *>(ls.get()))
   {
      rep.e_S = compute_e_S(mesh, res.final_nodes, res.S, s->center(), s->radius());
   }
   else { rep.e_S = std::numeric_limits<double>::quiet_NaN(); }
   Eigen::VectorXd marked(res.S.size());
   for (std::size_t k = 0; k < res.S.size(); k++) { marked(k) = res.sigma_final.coeffs(res.S[k]); }
   const InterfaceError E = compute_E(marked);
   rep.E_avg = E.avg;
   rep.E_max = E.max;
   rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

   if (!out_dir.empty())
   {
      namespace fs = std::filesystem;
      fs::create_directories(out_dir);
      const fs::path dir(out_dir);
      write_mesh((dir / "mesh_initial.mesh").string(), mesh, x0);
      write_mesh((dir / "mesh_final.mesh").string(), mesh, res.final_nodes);
      write_vtu((dir / "initial.vtu").string(), mesh, x0, res.sigma_initial);
      write_vtu((dir / "final.vtu").string(), mesh, res.final_nodes, res.sigma_final);
      std::ofstream hist(dir / "history.csv");
      write_history_csv(hist, res.solve);
      std::ofstream js(dir / "report.json");
      js << to_json(rep) << '\n';
      if (!hist || !js) { throw Error(ErrorKind::Io, "cannot write outputs to " + out_dir); }
   }
   return res;
}

} // namespace tmopfit
