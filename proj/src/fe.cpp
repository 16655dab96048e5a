#include "tmopfit/fe.hpp"
#include "tmopfit/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace tmopfit
{

int dimension(Geometry g)
{
   switch (g)
   {
      case Geometry::Segment: return 1;
      case Geometry::Triangle:
      case Geometry::Quad: return 2;
      case Geometry::Tet:
      case Geometry::Hex: return 3;
   }
   return 0;
}

double reference_volume(Geometry g)
{
   switch (g)
   {
      case Geometry::Triangle: return 0.5;
      case Geometry::Tet: return 1.0 / 6.0;
      default: return 1.0;
   }
}

bool is_simplex(Geometry g)
{
   return g == Geometry::Triangle || g == Geometry::Tet;
}

const char *to_string(Geometry g)
{
   switch (g)
   {
      case Geometry::Segment: return "segment";
      case Geometry::Triangle: return "triangle";
      case Geometry::Quad: return "quad";
      case Geometry::Tet: return "tet";
      case Geometry::Hex: return "hex";
   }
   return "?";
}

Geometry geometry_from_string(const std::string &name)
{
   if (name == "segment") { return Geometry::Segment; }
   if (name == "triangle" || name == "tri") { return Geometry::Triangle; }
   if (name == "quad") { return Geometry::Quad; }
   if (name == "tet") { return Geometry::Tet; }
   if (name == "hex") { return Geometry::Hex; }
   throw Error(ErrorKind::InvalidArgument, "unknown geometry '" + name + "'");
}

// Legendre-Gauss-Lobatto nodes via Newton on the recurrence, started from
// Chebyshev-Gauss-Lobatto points.
Rule1D gauss_lobatto_rule(int n_points)
{
   if (n_points < 2)
   {
      throw Error(ErrorKind::InvalidArgument, "Gauss-Lobatto needs at least 2 points");
   }
   const int n = n_points - 1;
   std::vector<double> x(n_points), w(n_points);
   for (int j = 0; j < n_points; j++) { x[j] = std::cos(M_PI * j / n); }

   std::vector<double> pn(n_points), pnm1(n_points);
   for (int it = 0; it < 100; it++)
   {
      double change = 0.0;
      for (int j = 0; j < n_points; j++)
      {
         double p0 = 1.0, p1 = x[j];
         for (int k = 2; k <= n; k++)
         {
            const double p2 = ((2.0 * k - 1.0) * x[j] * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
         }
         pn[j] = p1;
         pnm1[j] = p0;
         const double xnew = x[j] - (x[j] * p1 - p0) / ((n + 1.0) * p1);
         change = std::max(change, std::abs(xnew - x[j]));
         x[j] = xnew;
      }
      if (change < 1e-16) { break; }
   }
   for (int j = 0; j < n_points; j++)
   {
      double p0 = 1.0, p1 = x[j];
      for (int k = 2; k <= n; k++)
      {
         const double p2 = ((2.0 * k - 1.0) * x[j] * p1 - (k - 1.0) * p0) / k;
         p0 = p1;
         p1 = p2;
      }
      w[j] = 2.0 / (n * (n + 1.0) * p1 * p1);
   }

   Rule1D rule;
   rule.points.resize(n_points);
   rule.weights.resize(n_points);
   // x is descending on [-1,1]; map to ascending on [0,1]
   for (int j = 0; j < n_points; j++)
   {
      rule.points[j] = 0.5 * (1.0 - x[j]);
      rule.weights[j] = 0.5 * w[j];
   }
   rule.points.front() = 0.0;
   rule.points.back() = 1.0;
   // enforce exact symmetry
   for (int j = 0; j < n_points / 2; j++)
   {
      const double a = 0.5 * (rule.points[j] + 1.0 - rule.points[n - j]);
      rule.points[j] = a;
      rule.points[n - j] = 1.0 - a;
   }
   if (n_points % 2 == 1) { rule.points[n / 2] = 0.5; }
   return rule;
}

std::vector<double> gauss_lobatto_nodes(int n_points)
{
   return gauss_lobatto_rule(n_points).points;
}

Rule1D gauss_legendre_rule(int n_points)
{
   if (n_points < 1)
   {
      throw Error(ErrorKind::InvalidArgument, "Gauss-Legendre needs at least 1 point");
   }
   Rule1D rule;
   rule.points.resize(n_points);
   rule.weights.resize(n_points);
   for (int i = 0; i < n_points; i++)
   {
      double x = std::cos(M_PI * (i + 0.75) / (n_points + 0.5));
      double dp = 1.0;
      for (int it = 0; it < 100; it++)
      {
         double p0 = 1.0, p1 = x;
         for (int k = 2; k <= n_points; k++)
         {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
         }
         dp = n_points * (x * p1 - p0) / (x * x - 1.0);
         const double dx = p1 / dp;
         x -= dx;
         if (std::abs(dx) < 1e-16) { break; }
      }
      {
         double p0 = 1.0, p1 = x;
         for (int k = 2; k <= n_points; k++)
         {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
         }
         dp = n_points * (x * p1 - p0) / (x * x - 1.0);
      }
      rule.points[i] = 0.5 * (1.0 - x);
      rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
   }
   return rule;
}

QuadratureRule quadrature_exact(Geometry g, int degree)
{
   QuadratureRule q;
   q.geometry = g;
   q.exactness = degree;
   const int d = dimension(g);

   if (!is_simplex(g))
   {
      // 2n-3 >= degree
      const int n = std::max(2, (degree + 4) / 2);
      const Rule1D r = gauss_lobatto_rule(n);
      q.exactness = 2 * n - 3;
      int total = 1;
      for (int a = 0; a < d; a++) { total *= n; }
      q.points.resize(d, total);
      q.weights.resize(total);
      for (int idx = 0; idx < total; idx++)
      {
         int rem = idx;
         double w = 1.0;
         for (int a = 0; a < d; a++)
         {
            const int i = rem % n;
            rem /= n;
            q.points(a, idx) = r.points[i];
            w *= r.weights[i];
         }
         q.weights(idx) = w;
      }
      return q;
   }

   // Collapsed Gauss-Legendre product rules; the Duffy Jacobian raises the
   // polynomial degree in the collapsed directions.
   if (g == Geometry::Triangle)
   {
      const Rule1D ru = gauss_legendre_rule((degree + 2 + 1) / 2);
      const Rule1D rv = gauss_legendre_rule((degree + 1 + 1) / 2);
      const int nu = static_cast<int>(ru.points.size());
      const int nv = static_cast<int>(rv.points.size());
      q.points.resize(2, nu * nv);
      q.weights.resize(nu * nv);
      int idx = 0;
      for (int i = 0; i < nu; i++)
      {
         for (int j = 0; j < nv; j++, idx++)
         {
            const double u = ru.points[i], v = rv.points[j];
            q.points(0, idx) = u;
            q.points(1, idx) = (1.0 - u) * v;
            q.weights(idx) = ru.weights[i] * rv.weights[j] * (1.0 - u);
         }
      }
      return q;
   }

   const Rule1D ru = gauss_legendre_rule((degree + 3 + 1) / 2);
   const Rule1D rv = gauss_legendre_rule((degree + 2 + 1) / 2);
   const Rule1D rw = gauss_legendre_rule((degree + 1 + 1) / 2);
   const int nu = static_cast<int>(ru.points.size());
   const int nv = static_cast<int>(rv.points.size());
   const int nw = static_cast<int>(rw.points.size());
   q.points.resize(3, nu * nv * nw);
   q.weights.resize(nu * nv * nw);
   int idx = 0;
   for (int i = 0; i < nu; i++)
   {
      for (int j = 0; j < nv; j++)
      {
         for (int k = 0; k < nw; k++, idx++)
         {
            const double u = ru.points[i], v = rv.points[j], w = rw.points[k];
            q.points(0, idx) = u;
            q.points(1, idx) = (1.0 - u) * v;
            q.points(2, idx) = (1.0 - u) * (1.0 - v) * w;
            q.weights(idx) = ru.weights[i] * rv.weights[j] * rw.weights[k] *
                             (1.0 - u) * (1.0 - u) * (1.0 - v);
         }
      }
   }
   return q;
}

QuadratureRule quadrature_for(Geometry g, int order)
{
   if (order < 1) { throw Error(ErrorKind::InvalidArgument, "order must be >= 1"); }
   return quadrature_exact(g, 2 * order + 2);
}

// ---------------------------------------------------------------------------

namespace
{

double lagrange(const std::vector<double> &t, int m, double x)
{
   double v = 1.0;
   for (int n = 0; n < static_cast<int>(t.size()); n++)
   {
      if (n != m) { v *= (x - t[n]) / (t[m] - t[n]); }
   }
   return v;
}

double lagrange_deriv(const std::vector<double> &t, int m, double x)
{
   double s = 0.0;
   const int np = static_cast<int>(t.size());
   for (int p = 0; p < np; p++)
   {
      if (p == m) { continue; }
      double v = 1.0 / (t[m] - t[p]);
      for (int n = 0; n < np; n++)
      {
         if (n != m && n != p) { v *= (x - t[n]) / (t[m] - t[n]); }
      }
      s += v;
   }
   return s;
}

double lagrange_deriv2(const std::vector<double> &t, int m, double x)
{
   double s = 0.0;
   const int np = static_cast<int>(t.size());
   for (int p = 0; p < np; p++)
   {
      if (p == m) { continue; }
      for (int q = 0; q < np; q++)
      {
         if (q == m || q == p) { continue; }
         double v = 1.0 / ((t[m] - t[p]) * (t[m] - t[q]));
         for (int n = 0; n < np; n++)
         {
            if (n != m && n != p && n != q) { v *= (x - t[n]) / (t[m] - t[n]); }
         }
         s += v;
      }
   }
   return s;
}

} // namespace

NodalBasis::NodalBasis(Geometry g, int order) : geom_(g), order_(order), dim_(dimension(g))
{
   if (order < 1 || order > 10)
   {
      throw Error(ErrorKind::InvalidArgument, "basis order must be in [1,10]");
   }
   gl_ = gauss_lobatto_nodes(order + 1);
   if (is_simplex(g)) { build_simplex(); }
   else { build_tensor(); }
   build_faces();
}

void NodalBasis::build_tensor()
{
   const int n1 = order_ + 1;
   int total = 1;
   for (int a = 0; a < dim_; a++) { total *= n1; }
   nodes_.resize(dim_, total);
   lattice_.assign(total, {0, 0, 0});
   for (int idx = 0; idx < total; idx++)
   {
      int rem = idx;
      for (int a = 0; a < dim_; a++)
      {
         const int i = rem % n1;
         rem /= n1;
         lattice_[idx][a] = i;
         nodes_(a, idx) = gl_[i];
      }
   }
   auto at = [&](int i, int j, int k) { return i + n1 * (j + n1 * k); };
   const int p = order_;
   switch (geom_)
   {
      case Geometry::Segment: vertices_ = {0, p}; break;
      case Geometry::Quad: vertices_ = {at(0, 0, 0), at(p, 0, 0), at(p, p, 0), at(0, p, 0)}; break;
      default:
         vertices_ = {at(0, 0, 0), at(p, 0, 0), at(p, p, 0), at(0, p, 0),
                      at(0, 0, p), at(p, 0, p), at(p, p, p), at(0, p, p)};
   }
}

void NodalBasis::build_simplex()
{
   const int p = order_;
   std::vector<Eigen::VectorXd> pts;
   if (geom_ == Geometry::Triangle)
   {
      for (int j = 0; j <= p; j++)
      {
         for (int i = 0; i + j <= p; i++)
         {
            const double w = gl_[i] + gl_[j] + gl_[p - i - j];
            Eigen::VectorXd x(2);
            x << gl_[i] / w, gl_[j] / w;
            pts.push_back(x);
            lattice_.push_back({i, j, 0});
         }
      }
      for (int e = 0; e <= p; e++)
      {
         for (int f = 0; f + e <= p; f++)
         {
            exponents_.push_back({f, e, 0});
         }
      }
   }
   else
   {
      for (int k = 0; k <= p; k++)
      {
         for (int j = 0; j + k <= p; j++)
         {
            for (int i = 0; i + j + k <= p; i++)
            {
               const double w = gl_[i] + gl_[j] + gl_[k] + gl_[p - i - j - k];
               Eigen::VectorXd x(3);
               x << gl_[i] / w, gl_[j] / w, gl_[k] / w;
               pts.push_back(x);
               lattice_.push_back({i, j, k});
            }
         }
      }
      for (int c = 0; c <= p; c++)
      {
         for (int b = 0; b + c <= p; b++)
         {
            for (int a = 0; a + b + c <= p; a++)
            {
               exponents_.push_back({a, b, c});
            }
         }
      }
   }
   const int n = static_cast<int>(pts.size());
   nodes_.resize(dim_, n);
   for (int i = 0; i < n; i++) { nodes_.col(i) = pts[i]; }

   Eigen::MatrixXd vand(n, n);
   for (int i = 0; i < n; i++)
   {
      for (int m = 0; m < n; m++)
      {
         double v = 1.0;
         for (int a = 0; a < dim_; a++) { v *= std::pow(nodes_(a, i), exponents_[m][a]); }
         vand(i, m) = v;
      }
   }
   coeffs_ = vand.fullPivLu().inverse();

   auto find = [&](int i, int j, int k)
   {
      for (int m = 0; m < n; m++)
      {
         if (lattice_[m][0] == i && lattice_[m][1] == j && lattice_[m][2] == k) { return m; }
      }
      return -1;
   };
   if (geom_ == Geometry::Triangle) { vertices_ = {find(0, 0, 0), find(p, 0, 0), find(0, p, 0)}; }
   else { vertices_ = {find(0, 0, 0), find(p, 0, 0), find(0, p, 0), find(0, 0, p)}; }
}

void NodalBasis::build_faces()
{
   const int n = size();
   const double tol = 1e-12;
   std::vector<std::function<bool(const Eigen::VectorXd &)>> preds;
   auto coord_is = [&](int a, double v)
   { return [a, v, tol](const Eigen::VectorXd &x) { return std::abs(x(a) - v) < tol; }; };
   switch (geom_)
   {
      case Geometry::Segment:
         preds = {coord_is(0, 0.0), coord_is(0, 1.0)};
         break;
      case Geometry::Quad:
         preds = {coord_is(1, 0.0), coord_is(0, 1.0), coord_is(1, 1.0), coord_is(0, 0.0)};
         break;
      case Geometry::Hex:
         preds = {coord_is(2, 0.0), coord_is(1, 0.0), coord_is(0, 1.0),
                  coord_is(1, 1.0), coord_is(0, 0.0), coord_is(2, 1.0)};
         break;
      case Geometry::Triangle:
         preds = {coord_is(1, 0.0),
                  [tol](const Eigen::VectorXd &x) { return std::abs(x(0) + x(1) - 1.0) < tol; },
                  coord_is(0, 0.0)};
         break;
      case Geometry::Tet:
         preds = {[tol](const Eigen::VectorXd &x) { return std::abs(x.sum() - 1.0) < tol; },
                  coord_is(0, 0.0), coord_is(1, 0.0), coord_is(2, 0.0)};
         break;
   }
   for (const auto &pred : preds)
   {
      std::vector<int> f;
      for (int i = 0; i < n; i++)
      {
         if (pred(nodes_.col(i))) { f.push_back(i); }
      }
      faces_.push_back(std::move(f));
   }
}

void NodalBasis::eval(const Eigen::Ref<const Eigen::VectorXd> &ref,
                      Eigen::Ref<Eigen::VectorXd> values,
                      Eigen::Ref<Eigen::MatrixXd> grads) const
{
   const int n = size();
   if (!is_simplex(geom_))
   {
      const int n1 = order_ + 1;
      double lv[3][16], ld[3][16];
      for (int a = 0; a < dim_; a++)
      {
         for (int m = 0; m < n1; m++)
         {
            lv[a][m] = lagrange(gl_, m, ref(a));
            ld[a][m] = lagrange_deriv(gl_, m, ref(a));
         }
      }
      for (int idx = 0; idx < n; idx++)
      {
         const auto &l = lattice_[idx];
         double v = 1.0;
         for (int a = 0; a < dim_; a++) { v *= lv[a][l[a]]; }
         values(idx) = v;
         for (int b = 0; b < dim_; b++)
         {
            double g = 1.0;
            for (int a = 0; a < dim_; a++) { g *= (a == b) ? ld[a][l[a]] : lv[a][l[a]]; }
            grads(idx, b) = g;
         }
      }
      return;
   }

   // monomials and their gradients
   const int nm = static_cast<int>(exponents_.size());
   Eigen::VectorXd mono(nm);
   Eigen::MatrixXd dmono(nm, dim_);
   double pw[3][16];
   for (int a = 0; a < dim_; a++)
   {
      pw[a][0] = 1.0;
      for (int e = 1; e <= order_; e++) { pw[a][e] = pw[a][e - 1] * ref(a); }
   }
   for (int m = 0; m < nm; m++)
   {
      const auto &e = exponents_[m];
      double v = 1.0;
      for (int a = 0; a < dim_; a++) { v *= pw[a][e[a]]; }
      mono(m) = v;
      for (int b = 0; b < dim_; b++)
      {
         if (e[b] == 0) { dmono(m, b) = 0.0; continue; }
         double g = e[b];
         for (int a = 0; a < dim_; a++) { g *= (a == b) ? pw[a][e[a] - 1] : pw[a][e[a]]; }
         dmono(m, b) = g;
      }
   }
   values.noalias() = coeffs_.transpose() * mono;
   grads.noalias() = coeffs_.transpose() * dmono;
}

void NodalBasis::eval_hessian(const Eigen::Ref<const Eigen::VectorXd> &ref,
                              Eigen::Ref<Eigen::MatrixXd> hess) const
{
   const int n = size();
   if (!is_simplex(geom_))
   {
      const int n1 = order_ + 1;
      double lv[3][16][3];
      for (int a = 0; a < dim_; a++)
      {
         for (int m = 0; m < n1; m++)
         {
            lv[a][m][0] = lagrange(gl_, m, ref(a));
            lv[a][m][1] = lagrange_deriv(gl_, m, ref(a));
            lv[a][m][2] = lagrange_deriv2(gl_, m, ref(a));
         }
      }
      for (int idx = 0; idx < n; idx++)
      {
         const auto &l = lattice_[idx];
         for (int b = 0; b < dim_; b++)
         {
            for (int c = 0; c < dim_; c++)
            {
               double h = 1.0;
               for (int a = 0; a < dim_; a++) { h *= lv[a][l[a]][(a == b) + (a == c)]; }
               hess(idx, b + dim_ * c) = h;
            }
         }
      }
      return;
   }

   const int nm = static_cast<int>(exponents_.size());
   Eigen::MatrixXd d2(nm, dim_ * dim_);
   for (int m = 0; m < nm; m++)
   {
      const auto &e = exponents_[m];
      for (int b = 0; b < dim_; b++)
      {
         for (int c = 0; c < dim_; c++)
         {
            int k[3] = {0, 0, 0};
            k[b]++;
            k[c]++;
            double h = 1.0;
            for (int a = 0; a < dim_ && h != 0.0; a++)
            {
               if (e[a] < k[a]) { h = 0.0; break; }
               for (int r = 0; r < k[a]; r++) { h *= e[a] - r; }
               h *= std::pow(ref(a), e[a] - k[a]);
            }
            d2(m, b + dim_ * c) = h;
         }
      }
   }
   hess.noalias() = coeffs_.transpose() * d2;
}

bool NodalBasis::contains(const Eigen::Ref<const Eigen::VectorXd> &ref, double tol) const
{
   for (int a = 0; a < dim_; a++)
   {
      if (ref(a) < -tol) { return false; }
      if (!is_simplex(geom_) && ref(a) > 1.0 + tol) { return false; }
   }
   if (is_simplex(geom_) && ref.sum() > 1.0 + tol) { return false; }
   return true;
}

void NodalBasis::eval_checked(const Eigen::Ref<const Eigen::VectorXd> &ref,
                              Eigen::Ref<Eigen::VectorXd> values,
                              Eigen::Ref<Eigen::MatrixXd> grads) const
{
   if (ref.size() != dim_ || !contains(ref, 1e-10))
   {
      throw Error(ErrorKind::OutOfDomain, "reference point outside the reference element");
   }
   eval(ref, values, grads);
}

Eigen::VectorXd NodalBasis::clamp(const Eigen::Ref<const Eigen::VectorXd> &ref) const
{
   Eigen::VectorXd x = ref.cwiseMax(0.0);
   if (!is_simplex(geom_)) { return x.cwiseMin(1.0); }
   if (x.sum() <= 1.0) { return x; }
   // Euclidean projection onto {x >= 0, sum x = 1}
   std::vector<double> u(ref.data(), ref.data() + ref.size());
   std::sort(u.begin(), u.end(), std::greater<double>());
   double css = 0.0, theta = 0.0;
   for (int j = 0; j < static_cast<int>(u.size()); j++)
   {
      css += u[j];
      const double t = (css - 1.0) / (j + 1);
      if (u[j] - t > 0.0) { theta = t; }
   }
   return (ref.array() - theta).cwiseMax(0.0).matrix();
}

Eigen::VectorXd NodalBasis::center() const
{
   if (is_simplex(geom_)) { return Eigen::VectorXd::Constant(dim_, 1.0 / (dim_ + 1)); }
   return Eigen::VectorXd::Constant(dim_, 0.5);
}

} // namespace tmopfit

namespace tmopfit
{

BasisTable tabulate(const NodalBasis &basis, const Eigen::MatrixXd &points)
{
   BasisTable t;
   const int nq = static_cast<int>(points.cols());
   t.values.resize(basis.size(), nq);
   t.grads.assign(nq, Eigen::MatrixXd(basis.size(), basis.dim()));
   for (int q = 0; q < nq; q++)
   {
      basis.eval(points.col(q), t.values.col(q), t.grads[q]);
   }
   return t;
}

} // namespace tmopfit
