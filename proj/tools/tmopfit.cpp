// tmopfit: high-order mesh optimization with level-set surface fitting.

#include "tmopfit/app.hpp"
#include "tmopfit/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <random>
#include <set>

using namespace tmopfit;

namespace
{

/// Gradient and Hessian of the full objective against central differences on
/// small perturbed meshes of every element type.
int check_gradients(int seed)
{
   std::mt19937 rng(seed);
   std::uniform_real_distribution<double> u(-1, 1);
   const struct { int dim; Geometry g; int order; MetricId id; } cases[] = {
      {2, Geometry::Quad, 2, MetricId::Mu58},       {2, Geometry::Triangle, 3, MetricId::Mu80},
      {3, Geometry::Hex, 2, MetricId::Mu333},       {3, Geometry::Tet, 2, MetricId::Mu302}};
   bool ok = true;
   for (const auto &c : cases)
   {
      const int n = 2;
      auto md = make_cartesian(c.dim, n, c.order, c.g);
      const auto quad = quadrature_for(c.g, c.order);
      const auto ls = std::make_shared<SphereLevelSet>(Eigen::VectorXd::Constant(c.dim, 0.3), 0.3);
      const MarkedSet S = mark_interface_nodes(md.mesh, md.nodes, project(*ls, md.mesh, md.nodes));
      Objective obj(md.mesh, make_targets(md.mesh, md.nodes, TargetKind::IdealShapeInitialSize, quad),
                    quad, MetricSpec{c.id});
      obj.set_penalty(std::make_shared<FittingPenalty>(md.mesh, obj.targets(), quad, S, 100.0,
                                                       std::make_shared<AnalyticSigma>(ls)));
      obj.fix_nodes(md.mesh.boundary_nodes());

      NodeVector x = md.nodes;
      const double h = 0.15 / (n * c.order);
      for (int i = 0; i < x.size(); i++)
      {
         if (!obj.mask()[i]) { x(i) += h * u(rng); }
      }
      const auto ev = obj.evaluate(x, 2);
      const double eps = 1e-6;
      Eigen::VectorXd fd = Eigen::VectorXd::Zero(x.size());
      Eigen::MatrixXd Hfd = Eigen::MatrixXd::Identity(x.size(), x.size());
      for (int i = 0; i < x.size(); i++)
      {
         if (obj.mask()[i]) { continue; }
         NodeVector xp = x, xm = x;
         xp(i) += eps;
         xm(i) -= eps;
         const auto ep = obj.evaluate(xp, 1), em = obj.evaluate(xm, 1);
         fd(i) = (ep.report.F - em.report.F) / (2 * eps);
         Hfd.col(i) = (ep.gradient - em.gradient) / (2 * eps);
         for (int r = 0; r < x.size(); r++)
         {
            if (obj.mask()[r]) { Hfd(r, i) = 0.0; }
         }
      }
      const double ge = (ev.gradient - fd).norm() / fd.norm();
      const Eigen::MatrixXd H(ev.hessian);
      const double he = (H - Hfd).norm() / H.norm();
      const bool pass = ge < 1e-5 && he < 1e-4;
      ok = ok && pass;
      std::cout << to_string(c.g) << " order " << c.order << " " << to_string(c.id)
                << ": gradient " << ge << ", hessian " << he << (pass ? "  ok" : "  FAIL") << "\n";
   }
   return ok ? 0 : 1;
}

int info(const std::string &path)
{
   const MeshData md = read_mesh(path);
   const Mesh &m = md.mesh;
   const auto quad = quadrature_for(m.geometry(), m.order());
   const ValidityReport v = is_valid(m, md.nodes, quad);
   std::set<int> attrs;
   for (const auto &e : m.elements()) { attrs.insert(e.attribute); }
   std::cout << "geometry    " << to_string(m.geometry()) << "\n"
             << "order       " << m.order() << "\n"
             << "elements    " << m.num_elements() << "\n"
             << "nodes       " << m.num_nodes() << "\n"
             << "boundary    " << m.boundary().size() << " faces\n"
             << "attributes ";
   for (int a : attrs) { std::cout << " " << a; }
   std::cout << "\nvolume      " << element_volumes(m, md.nodes, quad).sum() << "\n"
             << "min det A   " << v.min_det << (v.valid ? "" : "  (invalid)") << "\n";
   return 0;
}

} // namespace

int main(int argc, char **argv)
{
   CLI::App app{"High-order mesh optimizer with level-set surface fitting"};
   app.require_subcommand(1);

   auto *run = app.add_subcommand("run", "Optimize one of the built-in cases");
   std::string case_name, out_dir, mode, metric, method, sigma;
   int order = -1, res = -1, max_iter = -1;
   double wsigma = -1.0;
   bool quiet = false;
   run->add_option("case", case_name, "Case name")->required()->check(CLI::IsMember(case_names()));
   run->add_option("--order", order, "Mesh order");
   run->add_option("--res", res, "Elements per direction");
   run->add_option("--wsigma", wsigma, "Fitting weight");
   run->add_option("--metric", metric, "Quality metric id, e.g. 58 or mu80");
   run->add_option("--mode", mode, "Interface treatment")->check(CLI::IsMember({"fixed", "relax"}));
   run->add_option("--method", method, "Nonlinear solver")->check(CLI::IsMember({"newton", "lbfgs"}));
   run->add_option("--max-iter", max_iter, "Nonlinear iteration limit");
   run->add_option("--sigma", sigma, "Level-set source: the field on the initial mesh or the analytic function")
      ->check(CLI::IsMember({"discrete", "analytic"}));
   run->add_option("--out", out_dir, "Output directory");
   run->add_flag("-q,--quiet", quiet, "No per-iteration output");

   auto *check = app.add_subcommand("check-gradients", "Compare derivatives against finite differences");
   int seed = 1;
   check->add_option("--seed", seed, "Random seed");

   auto *inf = app.add_subcommand("info", "Summarize a mesh file");
   std::string mesh_path;
   inf->add_option("mesh", mesh_path, "Mesh file")->required()->check(CLI::ExistingFile);

   CLI11_PARSE(app, argc, argv);

   try
   {
      if (*check) { return check_gradients(seed); }
      if (*inf) { return info(mesh_path); }

      TestCase tc = named_case(case_name);
      if (order > 0) { tc.order = order; }
      if (res > 0) { tc.res = res; }
      if (wsigma >= 0.0) { tc.weight = wsigma; }
      if (!metric.empty()) { tc.metric.id = metric_from_string(metric); }
      if (!mode.empty())
      {
         if (tc.mode == InterfaceMode::Fit)
         {
            throw Error(ErrorKind::InvalidArgument, "--mode applies to the relaxation cases");
         }
         tc.mode = interface_mode_from_string(mode);
      }
      if (!method.empty()) { tc.solver.method = method_from_string(method); }
      if (max_iter > 0) { tc.solver.max_iterations = max_iter; }
      if (!sigma.empty()) { tc.discrete_sigma = sigma == "discrete"; }
      if (out_dir.empty()) { out_dir = "out/" + case_name; }

      const CaseResult r = run_case(tc, out_dir, quiet ? nullptr : &std::cerr);
      std::cout << to_json(r.report) << "\n";
      return r.solve.reason == Termination::Converged ? 0 : 2;
   }
   catch (const Error &e)
   {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
   }
}
