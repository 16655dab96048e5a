#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace tmopfit
{

enum class Geometry { Segment, Triangle, Quad, Tet, Hex };

int dimension(Geometry g);
double reference_volume(Geometry g);
bool is_simplex(Geometry g);
const char *to_string(Geometry g);
Geometry geometry_from_string(const std::string &name);

/// 1D rule on [0,1].
struct Rule1D
{
   std::vector<double> points;
   std::vector<double> weights;
};

/// Gauss-Lobatto points on [0,1], ascending, endpoints included.
std::vector<double> gauss_lobatto_nodes(int n_points);
Rule1D gauss_lobatto_rule(int n_points);
Rule1D gauss_legendre_rule(int n_points);

struct QuadratureRule
{
   Geometry geometry = Geometry::Segment;
   int exactness = 0;        ///< total degree (simplex) or per-direction degree
   Eigen::MatrixXd points;   ///< dim x n
   Eigen::VectorXd weights;

   int size() const { return static_cast<int>(weights.size()); }
};

/// Rule integrating polynomials of degree 2*order+2 (per direction on tensor
/// elements, total degree on simplices).
QuadratureRule quadrature_for(Geometry g, int order);
QuadratureRule quadrature_exact(Geometry g, int degree);

/// Interpolatory Lagrange basis on the reference element. Tensor elements use
/// Gauss-Lobatto nodes in lexicographic order (x fastest); simplices use
/// Gauss-Lobatto points blended through barycentric indices.
class NodalBasis
{
public:
   NodalBasis(Geometry g, int order);

   Geometry geometry() const { return geom_; }
   int order() const { return order_; }
   int dim() const { return dim_; }
   int size() const { return static_cast<int>(nodes_.cols()); }

   /// Reference node coordinates, dim x size.
   const Eigen::MatrixXd &nodes() const { return nodes_; }

   /// Integer lattice index of each node: tensor (i,j,k) in [0,order]^d, or
   /// the leading barycentric indices for simplices.
   const std::vector<std::array<int, 3>> &lattice() const { return lattice_; }

   /// Values (size) and reference gradients (size x dim) at `ref`. No domain check.
   void eval(const Eigen::Ref<const Eigen::VectorXd> &ref,
             Eigen::Ref<Eigen::VectorXd> values,
             Eigen::Ref<Eigen::MatrixXd> grads) const;

   /// Reference second derivatives, size x dim^2; column b + dim*c holds d2/dxb dxc.
   void eval_hessian(const Eigen::Ref<const Eigen::VectorXd> &ref,
                     Eigen::Ref<Eigen::MatrixXd> hess) const;

   /// Checked evaluation; throws out-of-domain outside the element (tol 1e-10).
   void eval_checked(const Eigen::Ref<const Eigen::VectorXd> &ref,
                     Eigen::Ref<Eigen::VectorXd> values,
                     Eigen::Ref<Eigen::MatrixXd> grads) const;

   bool contains(const Eigen::Ref<const Eigen::VectorXd> &ref, double tol) const;
   /// Closest point of the reference element.
   Eigen::VectorXd clamp(const Eigen::Ref<const Eigen::VectorXd> &ref) const;
   Eigen::VectorXd center() const;

   /// Local node lists of the reference faces (edges in 2D).
   const std::vector<std::vector<int>> &faces() const { return faces_; }
   /// Local indices of the corner nodes, in the usual vertex order.
   const std::vector<int> &vertices() const { return vertices_; }

private:
   void build_tensor();
   void build_simplex();
   void build_faces();

   Geometry geom_;
   int order_;
   int dim_;
   Eigen::MatrixXd nodes_;
   std::vector<std::array<int, 3>> lattice_;
   std::vector<std::vector<int>> faces_;
   std::vector<int> vertices_;

   // tensor data
   std::vector<double> gl_;
   // simplex data: monomial exponents and inverse Vandermonde
   std::vector<std::array<int, 3>> exponents_;
   Eigen::MatrixXd coeffs_;
};

} // namespace tmopfit

namespace tmopfit
{

/// Basis values (size x nq) and reference gradients (one size x dim block per
/// point) tabulated at the points of a rule.
struct BasisTable
{
   Eigen::MatrixXd values;
   std::vector<Eigen::MatrixXd> grads;
};

BasisTable tabulate(const NodalBasis &basis, const Eigen::MatrixXd &points);

} // namespace tmopfit
