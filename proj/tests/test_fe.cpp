#include "doctest.h"

#include "tmopfit/error.hpp"
#include "tmopfit/fe.hpp"

#include <cmath>
#include <random>

using namespace tmopfit;

namespace
{

double legendre_deriv3(double x) { return 0.5 * (15.0 * x * x - 3.0); }

double bisect(double lo, double hi)
{
   for (int it = 0; it < 200; it++)
   {
      const double mid = 0.5 * (lo + hi);
      if ((legendre_deriv3(lo) < 0) == (legendre_deriv3(mid) < 0)) { lo = mid; }
      else { hi = mid; }
   }
   return 0.5 * (lo + hi);
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Closed-form integral of x^a y^b z^c over the reference element.
double monomial_integral(Geometry g, int a, int b, int c)
{
   switch (g)
   {
      case Geometry::Segment: return 1.0 / (a + 1);
      case Geometry::Quad: return 1.0 / ((a + 1) * (b + 1));
      case Geometry::Hex: return 1.0 / ((a + 1) * (b + 1) * (c + 1));
      case Geometry::Triangle: return factorial(a) * factorial(b) / factorial(a + b + 2);
      case Geometry::Tet:
         return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
   }
   return 0.0;
}

Eigen::VectorXd random_ref_point(Geometry g, std::mt19937 &rng)
{
   std::uniform_real_distribution<double> u(0.0, 1.0);
   const int d = dimension(g);
   Eigen::VectorXd p(d);
   do
   {
      for (int a = 0; a < d; a++) { p(a) = u(rng); }
   } while (is_simplex(g) && p.sum() > 1.0);
   return p;
}

const Geometry kAll[] = {Geometry::Segment, Geometry::Triangle, Geometry::Quad,
                         Geometry::Tet, Geometry::Hex};

} // namespace

TEST_CASE("gauss_lobatto_nodes small cases")
{
   auto n2 = gauss_lobatto_nodes(2);
   REQUIRE(n2.size() == 2);
   CHECK(n2[0] == 0.0);
   CHECK(n2[1] == 1.0);

   auto n3 = gauss_lobatto_nodes(3);
   CHECK(n3[1] == doctest::Approx(0.5).epsilon(1e-15));

   CHECK_THROWS_AS(gauss_lobatto_nodes(1), Error);
}

TEST_CASE("gauss_lobatto_nodes(4) matches independent root-find of P3'")
{
   // roots of P3' on [-1,1], mapped to [0,1] with t = (1 - x)/2
   const double r = bisect(0.0, 1.0);
   const double lo = 0.5 * (1.0 - r), hi = 0.5 * (1.0 + r);
   CHECK(std::abs(lo - (5.0 - std::sqrt(5.0)) / 10.0) < 1e-14);

   const auto n4 = gauss_lobatto_nodes(4);
   CHECK(std::abs(n4[1] - lo) < 1e-14);
   CHECK(std::abs(n4[2] - hi) < 1e-14);

   // the 4-point rule is exact through degree 5
   const Rule1D rule = gauss_lobatto_rule(4);
   for (int p = 0; p <= 5; p++)
   {
      double s = 0.0;
      for (int i = 0; i < 4; i++) { s += rule.weights[i] * std::pow(rule.points[i], p); }
      CHECK(std::abs(s - 1.0 / (p + 1)) < 1e-15);
   }
}

TEST_CASE("gauss_lobatto_nodes symmetric for many sizes")
{
   for (int n = 2; n <= 12; n++)
   {
      const auto t = gauss_lobatto_nodes(n);
      for (int i = 0; i < n; i++) { CHECK(std::abs(t[i] + t[n - 1 - i] - 1.0) < 1e-15); }
      for (int i = 1; i < n; i++) { CHECK(t[i] > t[i - 1]); }
   }
}

TEST_CASE("basis is interpolatory at its nodes")
{
   for (Geometry g : kAll)
   {
      for (int k = 1; k <= 4; k++)
      {
         NodalBasis b(g, k);
         Eigen::VectorXd w(b.size());
         Eigen::MatrixXd grad(b.size(), b.dim());
         for (int j = 0; j < b.size(); j++)
         {
            b.eval(b.nodes().col(j), w, grad);
            for (int i = 0; i < b.size(); i++)
            {
               CHECK(std::abs(w(i) - (i == j ? 1.0 : 0.0)) < 1e-13);
            }
         }
      }
   }
}

TEST_CASE("node count matches the polynomial space")
{
   CHECK(NodalBasis(Geometry::Quad, 3).size() == 16);
   CHECK(NodalBasis(Geometry::Hex, 2).size() == 27);
   CHECK(NodalBasis(Geometry::Triangle, 3).size() == 10);
   CHECK(NodalBasis(Geometry::Tet, 2).size() == 10);
   CHECK(NodalBasis(Geometry::Tet, 3).size() == 20);
}

TEST_CASE("partition of unity and zero gradient sum")
{
   std::mt19937 rng(7);
   for (Geometry g : kAll)
   {
      for (int k = 1; k <= 4; k++)
      {
         NodalBasis b(g, k);
         Eigen::VectorXd w(b.size());
         Eigen::MatrixXd grad(b.size(), b.dim());
         for (int s = 0; s < 100; s++)
         {
            b.eval(random_ref_point(g, rng), w, grad);
            CHECK(std::abs(w.sum() - 1.0) < 1e-12);
            CHECK(grad.colwise().sum().norm() < 1e-11);
         }
      }
   }
}

TEST_CASE("eval_basis examples")
{
   NodalBasis quad(Geometry::Quad, 1);
   Eigen::VectorXd w(4);
   Eigen::MatrixXd g(4, 2);
   quad.eval_checked(quad.nodes().col(0), w, g);
   CHECK(w(0) == doctest::Approx(1.0));
   CHECK(w.tail(3).norm() < 1e-15);

   NodalBasis seg(Geometry::Segment, 1);
   Eigen::VectorXd ws(2);
   Eigen::MatrixXd gs(2, 1);
   Eigen::VectorXd t(1);
   t << 0.25;
   seg.eval_checked(t, ws, gs);
   CHECK(ws(0) == doctest::Approx(0.75));
   CHECK(ws(1) == doctest::Approx(0.25));
   CHECK(gs(0, 0) == doctest::Approx(-1.0));
   CHECK(gs(1, 0) == doctest::Approx(1.0));

   Eigen::VectorXd out(2);
   out << 1.2, 0.5;
   try
   {
      quad.eval_checked(out, w, g);
      FAIL("expected out-of-domain");
   }
   catch (const Error &e) { CHECK(e.kind() == ErrorKind::OutOfDomain); }
}

TEST_CASE("basis gradients agree with finite differences")
{
   std::mt19937 rng(11);
   for (Geometry g : kAll)
   {
      NodalBasis b(g, 3);
      Eigen::VectorXd w(b.size()), wp(b.size()), wm(b.size());
      Eigen::MatrixXd grad(b.size(), b.dim()), tmp(b.size(), b.dim());
      Eigen::VectorXd p = random_ref_point(g, rng) * 0.9;
      b.eval(p, w, grad);
      const double h = 1e-6;
      for (int a = 0; a < b.dim(); a++)
      {
         Eigen::VectorXd pp = p, pm = p;
         pp(a) += h;
         pm(a) -= h;
         b.eval(pp, wp, tmp);
         b.eval(pm, wm, tmp);
         CHECK(((wp - wm) / (2 * h) - grad.col(a)).norm() < 1e-7);
      }
   }
}

TEST_CASE("faces hold the expected number of nodes")
{
   const struct { Geometry g; int k; std::size_t nf, per_face; } cases[] = {
      {Geometry::Quad, 3, 4, 4}, {Geometry::Hex, 2, 6, 9},
      {Geometry::Triangle, 3, 3, 4}, {Geometry::Tet, 2, 4, 6}};
   for (const auto &c : cases)
   {
      const NodalBasis b(c.g, c.k);
      CHECK(b.faces().size() == c.nf);
      for (const auto &f : b.faces()) { CHECK(f.size() == c.per_face); }
   }
}

TEST_CASE("quadrature weights sum to the reference measure")
{
   CHECK(quadrature_for(Geometry::Quad, 2).weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
   CHECK(quadrature_for(Geometry::Triangle, 3).weights.sum() ==
         doctest::Approx(0.5).epsilon(1e-14));
   CHECK(quadrature_for(Geometry::Tet, 2).weights.sum() ==
         doctest::Approx(1.0 / 6.0).epsilon(1e-14));
   for (Geometry g : kAll)
   {
      const auto q = quadrature_for(g, 2);
      CHECK((q.weights.array() > 0.0).all());
   }
}

TEST_CASE("segment rule for order 1 integrates t^0..t^4")
{
   const auto q = quadrature_for(Geometry::Segment, 1);
   CHECK(q.exactness >= 4);
   for (int p = 0; p <= 4; p++)
   {
      double s = 0.0;
      for (int i = 0; i < q.size(); i++) { s += q.weights(i) * std::pow(q.points(0, i), p); }
      CHECK(std::abs(s - 1.0 / (p + 1)) < 1e-14);
   }
}

TEST_CASE("quadrature integrates random polynomials of its exactness degree")
{
   std::mt19937 rng(3);
   std::uniform_real_distribution<double> coef(-1.0, 1.0);
   for (Geometry g : kAll)
   {
      for (int k = 1; k <= 3; k++)
      {
         const auto q = quadrature_for(g, k);
         const int deg = 2 * k + 2;
         const int d = dimension(g);
         // random polynomial: full tensor space for tensor elements, total degree for simplices
         double exact = 0.0;
         Eigen::VectorXd vals = Eigen::VectorXd::Zero(q.size());
         for (int a = 0; a <= deg; a++)
         {
            for (int b = 0; b <= (d > 1 ? deg : 0); b++)
            {
               for (int c = 0; c <= (d > 2 ? deg : 0); c++)
               {
                  if (is_simplex(g) && a + b + c > deg) { continue; }
                  const double cf = coef(rng);
                  exact += cf * monomial_integral(g, a, b, c);
                  for (int i = 0; i < q.size(); i++)
                  {
                     double m = std::pow(q.points(0, i), a);
                     if (d > 1) { m *= std::pow(q.points(1, i), b); }
                     if (d > 2) { m *= std::pow(q.points(2, i), c); }
                     vals(i) += cf * m;
                  }
               }
            }
         }
         CHECK(std::abs(q.weights.dot(vals) - exact) < 1e-12);
      }
   }
}

TEST_CASE("clamp projects onto the reference element")
{
   NodalBasis tri(Geometry::Triangle, 1);
   Eigen::VectorXd p(2);
   p << 0.8, 0.8;
   const Eigen::VectorXd c = tri.clamp(p);
   CHECK(c(0) == doctest::Approx(0.5));
   CHECK(c(1) == doctest::Approx(0.5));
   p << -0.2, 0.3;
   CHECK(tri.clamp(p)(0) == 0.0);
   CHECK(tri.clamp(p)(1) == doctest::Approx(0.3));
}

TEST_CASE("reference Hessians agree with differences of the gradients")
{
   std::mt19937 rng(13);
   for (Geometry g : kAll)
   {
      for (int k = 1; k <= 3; k++)
      {
         NodalBasis b(g, k);
         const int d = b.dim();
         Eigen::VectorXd w(b.size());
         Eigen::MatrixXd gp(b.size(), d), gm(b.size(), d), h(b.size(), d * d);
         const Eigen::VectorXd p = random_ref_point(g, rng) * 0.9;
         b.eval_hessian(p, h);
         const double eps = 1e-6;
         for (int c = 0; c < d; c++)
         {
            Eigen::VectorXd pp = p, pm = p;
            pp(c) += eps;
            pm(c) -= eps;
            b.eval(pp, w, gp);
            b.eval(pm, w, gm);
            const Eigen::MatrixXd fd = (gp - gm) / (2 * eps);
            for (int r = 0; r < d; r++)
            {
               CHECK((h.col(r + d * c) - fd.col(r)).norm() < 1e-6 * std::max(1.0, fd.norm()));
            }
         }
      }
   }
}
