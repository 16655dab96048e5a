#include "doctest.h"

#include "tmopfit/error.hpp"
#include "tmopfit/fitting.hpp"

#include <random>
#include <map>
#include <numeric>
#include <set>

using namespace tmopfit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace
{

/// Random interior perturbation of a Cartesian mesh, amplitude frac * h.
NodeVector perturb(const Mesh &mesh, const NodeVector &x, double frac, int n, std::mt19937 &rng)
{
   std::uniform_real_distribution<double> u(-1, 1);
   NodeVector y = x;
   const double h = 1.0 / (n * mesh.order());
   std::vector<int> bdr = mesh.boundary_nodes();
   std::set<int> fixed(bdr.begin(), bdr.end());
   for (int i = 0; i < mesh.num_nodes(); i++)
   {
      if (fixed.count(i)) { continue; }
      for (int a = 0; a < mesh.dim(); a++) { y(dof_index(mesh, a, i)) += frac * h * u(rng); }
   }
   return y;
}

double fd_rel(const VectorXd &g, const VectorXd &fd)
{
   return (g - fd).norm() / std::max(1e-300, fd.norm());
}

struct Setup
{
   MeshData md;
   TargetJacobian targets;
   QuadratureRule quad;
   MarkedSet S;
};

Setup make_setup(int dim, Geometry g, int order, int n, TargetKind kind, const LevelSet &ls)
{
   Setup s{make_cartesian(dim, n, order, g), {}, quadrature_for(g, order), {}};
   s.targets = make_targets(s.md.mesh, s.md.nodes, kind, s.quad);
   s.S = mark_interface_nodes(s.md.mesh, s.md.nodes, project(ls, s.md.mesh, s.md.nodes));
   return s;
}

/// Marked nodes off the domain boundary; boundary nodes are not free to move.
std::vector<int> free_marked(const FittingPenalty &P, const Mesh &mesh)
{
   std::vector<int> bdr = mesh.boundary_nodes();
   std::set<int> fixed(bdr.begin(), bdr.end());
   std::vector<int> out;
   for (int s : P.marked())
   {
      if (!fixed.count(s)) { out.push_back(s); }
   }
   return out;
}

VectorXd fd_gradient(const FittingPenalty &P, const Mesh &mesh, const NodeVector &x, double h)
{
   VectorXd fd = VectorXd::Zero(mesh.num_dofs());
   for (int s : free_marked(P, mesh))
   {
      for (int a = 0; a < mesh.dim(); a++)
      {
         const int i = dof_index(mesh, a, s);
         NodeVector xp = x, xm = x;
         xp(i) += h;
         xm(i) -= h;
         fd(i) = (P.value(P.sample(xp, false)) - P.value(P.sample(xm, false))) / (2 * h);
      }
   }
   return fd;
}

} // namespace

TEST_CASE("attribute marking picks the shared nodes")
{
   auto md = make_cartesian(2, 2, 2, Geometry::Quad);
   for (int e = 0; e < md.mesh.num_elements(); e++)
   {
      const VectorXd c = element_position(md.mesh, md.nodes, e, VectorXd::Constant(2, 0.5));
      md.mesh.set_attribute(e, c(0) < 0.5 ? 1 : 2);
   }
   const MarkedSet S = mark_interface_nodes(md.mesh);
   CHECK(S.size() == 5);
   for (int s : S) { CHECK(node_position(md.mesh, md.nodes, s)(0) == doctest::Approx(0.5)); }
   CHECK(std::is_sorted(S.begin(), S.end()));

   auto uni = make_cartesian(2, 2, 2, Geometry::Quad);
   try
   {
      mark_interface_nodes(uni.mesh);
      FAIL("expected empty marked set");
   }
   catch (const Error &e) { CHECK(e.kind() == ErrorKind::EmptyMarkedSet); }
}

TEST_CASE("sigma-sign marking forms closed loops around the circle")
{
   SphereLevelSet ls(VectorXd::Constant(2, 0.5), 0.3);
   auto md = make_cartesian(2, 8, 1, Geometry::Quad);
   const ScalarField sigma = project(ls, md.mesh, md.nodes);
   const MarkedSet S = mark_interface_nodes(md.mesh, md.nodes, sigma);
   CHECK(S.size() > 8);
   std::map<int, int> degree;
   for (const auto &f : md.mesh.faces())
   {
      if (f.elem1 < 0) { continue; }
      if (md.mesh.element(f.elem0).attribute == md.mesh.element(f.elem1).attribute) { continue; }
      for (int n : f.nodes) { degree[n]++; }
   }
   CHECK(degree.size() == S.size());
   for (const auto &kv : degree) { CHECK(kv.second % 2 == 0); }
   for (int s : S)
   {
      CHECK(std::abs(ls.value(node_position(md.mesh, md.nodes, s))) < std::sqrt(2.0) / 8);
      // adjacent elements straddle the interface
      std::set<int> attrs;
      for (int e : md.mesh.node_elements()[s]) { attrs.insert(md.mesh.element(e).attribute); }
      CHECK(attrs.size() == 2);
   }
}

TEST_CASE("restricted field")
{
   auto md = make_cartesian(2, 2, 2, Geometry::Triangle);
   ScalarField ones;
   ones.coeffs = VectorXd::Ones(md.mesh.num_nodes());
   MarkedSet all(md.mesh.num_nodes());
   std::iota(all.begin(), all.end(), 0);
   CHECK(restrict_field(ones, all).coeffs == ones.coeffs);
   CHECK(restrict_field(ones, {}).coeffs.isZero(0.0));

   const int j = 12;
   const ScalarField r = restrict_field(ones, {j});
   std::mt19937 rng(3);
   std::uniform_real_distribution<double> u(0, 1);
   const auto &b = md.mesh.basis();
   VectorXd w(b.size());
   MatrixXd g(b.size(), 2);
   for (int e : md.mesh.node_elements()[j])
   {
      const auto &nodes = md.mesh.element(e).nodes;
      const int local = static_cast<int>(std::find(nodes.begin(), nodes.end(), j) - nodes.begin());
      for (int s = 0; s < 10; s++)
      {
         VectorXd p(2);
         do { p << u(rng), u(rng); } while (p.sum() > 1);
         b.eval(p, w, g);
         CHECK(eval(r, md.mesh, md.nodes, e, p) == doctest::Approx(w(local)));
      }
   }
}

TEST_CASE("single unit-square element with one marked corner")
{
   auto md = make_cartesian(2, 1, 1, Geometry::Quad);
   const auto quad = quadrature_for(Geometry::Quad, 1);
   const auto t = make_targets(md.mesh, md.nodes, TargetKind::IdealShapeUnitSize, quad);
   const double c = 0.7, w = 3.0;
   ScalarField sigma;
   sigma.coeffs = VectorXd::Constant(4, c);
   const ScalarField bar = restrict_field(sigma, {0});
   const double inv_c = penalty_normalization(t, md.mesh);
   CHECK(inv_c == 1.0);
   CHECK(penalty_value(w, inv_c, bar, md.mesh, t, quad) == doctest::Approx(w * c * c / 9.0));
   CHECK(penalty_value(0.0, inv_c, bar, md.mesh, t, quad) == 0.0);
   CHECK(penalty_value(w, inv_c, restrict_field(sigma, {}), md.mesh, t, quad) == 0.0);

   // same value through the mass-matrix pathway with a constant source
   struct Constant : SigmaSource
   {
      double c;
      SigmaSample sample(const Eigen::Ref<const VectorXd> &, bool h) const override
      {
         SigmaSample s;
         s.value = c;
         s.grad = VectorXd::Zero(2);
         if (h) { s.hess = MatrixXd::Zero(2, 2); }
         return s;
      }
   };
   auto src = std::make_shared<Constant>();
   src->c = c;
   FittingPenalty P(md.mesh, t, quad, {0}, w, src);
   CHECK(P.value(P.sample(md.nodes, false)) == doctest::Approx(w * c * c / 9.0));
}

TEST_CASE("normalization is invariant under refinement")
{
   for (Geometry g : {Geometry::Quad, Geometry::Triangle})
   {
      for (TargetKind kind : {TargetKind::IdealShapeUnitSize, TargetKind::IdealShapeInitialSize})
      {
         double vals[2];
         for (int r = 0; r < 2; r++)
         {
            auto md = make_cartesian(2, 4 << r, 2, g);
            const auto quad = quadrature_for(g, 2);
            const auto t = make_targets(md.mesh, md.nodes, kind, quad);
            ScalarField sigma;
            sigma.coeffs = VectorXd::Constant(md.mesh.num_nodes(), 0.4);
            vals[r] = penalty_value(10.0, penalty_normalization(t, md.mesh), sigma, md.mesh, t,
                                    quad);
         }
         CHECK(std::abs(vals[0] - vals[1]) < 1e-10);
      }
   }
}

TEST_CASE("mass-matrix value agrees with direct quadrature")
{
   std::mt19937 rng(5);
   auto ls = std::make_shared<SphereLevelSet>(VectorXd::Constant(2, 0.5), 0.3);
   auto s = make_setup(2, Geometry::Triangle, 3, 4, TargetKind::IdealShapeInitialSize, *ls);
   const NodeVector x = perturb(s.md.mesh, s.md.nodes, 0.2, 4, rng);
   FittingPenalty P(s.md.mesh, s.targets, s.quad, s.S, 100.0, std::make_shared<AnalyticSigma>(ls));
   const auto smp = P.sample(x, false);
   const double direct = penalty_value(100.0, P.normalization(), P.restricted(smp), s.md.mesh,
                                       s.targets, s.quad);
   CHECK(P.value(smp) == doctest::Approx(direct).epsilon(1e-13));
   CHECK(P.value(smp) > 0.0);
}

TEST_CASE("penalty gradient and Hessian against finite differences")
{
   std::mt19937 rng(7);
   const struct { int dim; Geometry g; int order; int n; } cases[] = {
      {2, Geometry::Quad, 1, 6}, {2, Geometry::Quad, 3, 4}, {2, Geometry::Triangle, 2, 4},
      {2, Geometry::Triangle, 3, 4}, {3, Geometry::Hex, 2, 3}, {3, Geometry::Tet, 1, 4},
      {3, Geometry::Tet, 2, 3}};
   for (const auto &c : cases)
   {
      const VectorXd center = VectorXd::Constant(c.dim, 0.5);
      auto ls = std::make_shared<LobedLevelSet>(center, 0.3, 0.05);
      auto s = make_setup(c.dim, c.g, c.order, c.n, TargetKind::IdealShapeInitialSize, *ls);
      const NodeVector x = perturb(s.md.mesh, s.md.nodes, 0.15, c.n, rng);

      std::vector<std::shared_ptr<const SigmaSource>> sources = {
         std::make_shared<AnalyticSigma>(ls),
         std::make_shared<DiscreteSigma>(s.md.mesh, s.md.nodes,
                                         project(*ls, s.md.mesh, s.md.nodes))};
      for (const auto &src : sources)
      {
         FittingPenalty P(s.md.mesh, s.targets, s.quad, s.S, 1000.0, src);
         P.set_fixed_nodes(s.md.mesh.boundary_nodes());
         const auto smp = P.sample(x, true);
         const std::vector<int> movable = free_marked(P, s.md.mesh);
         REQUIRE(!movable.empty());
         VectorXd g = VectorXd::Zero(s.md.mesh.num_dofs());
         const VectorXd gfull = P.gradient(smp);
         for (int si : movable)
         {
            for (int a = 0; a < c.dim; a++)
            {
               const int i = dof_index(s.md.mesh, a, si);
               g(i) = gfull(i);
            }
         }
         CHECK(fd_rel(g, fd_gradient(P, s.md.mesh, x, 1e-7)) < 1e-5);

         const MatrixXd Ha = MatrixXd(P.hessian(x, smp, PenaltyHessianMode::Analytic));
         const MatrixXd Hf = MatrixXd(P.hessian(x, smp, PenaltyHessianMode::FdOfGradient));
         CHECK((Ha - Ha.transpose()).norm() <= 1e-10 * Ha.norm());
         CHECK((Hf - Hf.transpose()).norm() <= 1e-10 * Hf.norm());
         CHECK((Ha - Hf).norm() / Ha.norm() < 1e-4);

         // independent oracle: full differences of the gradient along marked dofs
         VectorXd free_dofs = VectorXd::Zero(s.md.mesh.num_dofs());
         for (int si : movable)
         {
            for (int a = 0; a < c.dim; a++) { free_dofs(dof_index(s.md.mesh, a, si)) = 1.0; }
         }
         const double h = 1e-6;
         double num = 0.0, den = 0.0;
         for (int si : movable)
         {
            for (int a = 0; a < c.dim; a++)
            {
               const int i = dof_index(s.md.mesh, a, si);
               NodeVector xp = x, xm = x;
               xp(i) += h;
               xm(i) -= h;
               const VectorXd col =
                  free_dofs.cwiseProduct(P.gradient(P.sample(xp, false)) -
                                         P.gradient(P.sample(xm, false))) / (2 * h);
               num += (Ha.col(i) - col).squaredNorm();
               den += col.squaredNorm();
            }
         }
         CHECK(std::sqrt(num / den) < 1e-4);
      }
   }
}

TEST_CASE("discrete-gradient second derivatives approximate the element ones")
{
   auto ls = std::make_shared<SphereLevelSet>(VectorXd::Constant(2, 0.5), 0.3);
   auto s = make_setup(2, Geometry::Quad, 3, 8, TargetKind::IdealShapeUnitSize, *ls);
   const ScalarField sigma0 = project(*ls, s.md.mesh, s.md.nodes);
   DiscreteSigma exact(s.md.mesh, s.md.nodes, sigma0);
   DiscreteSigma dg(s.md.mesh, s.md.nodes, sigma0, DiscreteSigma::SecondDerivative::DiscreteGradient);
   for (int k : s.S)
   {
      const VectorXd p = node_position(s.md.mesh, s.md.nodes, k);
      const auto a = exact.sample(p, true), b = dg.sample(p, true);
      CHECK(a.value == doctest::Approx(b.value));
      CHECK((a.grad - b.grad).norm() < 1e-12);
      CHECK((a.hess - ls->hessian(p)).norm() < 0.2 * ls->hessian(p).norm());
      CHECK((b.hess - ls->hessian(p)).norm() < 0.2 * ls->hessian(p).norm());
   }
}

TEST_CASE("gradient sign and monotone decrease for a single marked node")
{
   auto ls = std::make_shared<SphereLevelSet>(VectorXd::Constant(2, 0.5), 0.3);
   auto md = make_cartesian(2, 4, 2, Geometry::Quad);
   const auto quad = quadrature_for(Geometry::Quad, 2);
   const auto t = make_targets(md.mesh, md.nodes, TargetKind::IdealShapeUnitSize, quad);
   // node at (0.5, 0.875) is at distance 0.075 outside; move it to distance 0.1
   int node = -1;
   for (int i = 0; i < md.mesh.num_nodes(); i++)
   {
      const VectorXd p = node_position(md.mesh, md.nodes, i);
      if ((p - (VectorXd(2) << 0.5, 0.875).finished()).norm() < 1e-12) { node = i; }
   }
   REQUIRE(node >= 0);
   NodeVector x = md.nodes;
   x(dof_index(md.mesh, 1, node)) = 0.9;
   FittingPenalty P(md.mesh, t, quad, {node}, 10.0, std::make_shared<AnalyticSigma>(ls));
   const VectorXd g = P.gradient(P.sample(x, false));
   CHECK(g(dof_index(md.mesh, 1, node)) > 0.0);   // radial direction is +y here

   double prev = P.value(P.sample(x, false));
   for (int k = 0; k < 10; k++)
   {
      const VectorXd p = node_position(md.mesh, x, node);
      set_node_position(md.mesh, x, node, p - 0.005 * ls->gradient(p));
      const double v = P.value(P.sample(x, false));
      CHECK(v < prev);
      prev = v;
   }
}

TEST_CASE("zero level set gives zero derivatives")
{
   struct Zero : SigmaSource
   {
      SigmaSample sample(const Eigen::Ref<const VectorXd> &, bool h) const override
      {
         SigmaSample s;
         s.grad = VectorXd::Constant(2, 1.0);
         if (h) { s.hess = MatrixXd::Identity(2, 2); }
         return s;
      }
   };
   auto md = make_cartesian(2, 2, 2, Geometry::Quad);
   const auto quad = quadrature_for(Geometry::Quad, 2);
   const auto t = make_targets(md.mesh, md.nodes, TargetKind::IdealShapeUnitSize, quad);
   MarkedSet all(md.mesh.num_nodes());
   std::iota(all.begin(), all.end(), 0);
   FittingPenalty P(md.mesh, t, quad, all, 5.0, std::make_shared<Zero>());
   const auto smp = P.sample(md.nodes, true);
   CHECK(P.value(smp) == 0.0);
   CHECK(P.gradient(smp).isZero(0.0));
   // only the rank-one term survives; with grad sigma fixed it is M (x) g g^T
   const MatrixXd H = MatrixXd(P.hessian(md.nodes, smp, PenaltyHessianMode::Analytic));
   CHECK((H - H.transpose()).norm() < 1e-12);
}
