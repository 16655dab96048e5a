#include "tmopfit/mesh.hpp"
#include "tmopfit/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>

namespace tmopfit
{

Mesh::Mesh(Geometry geom, int order, std::vector<Element> elements,
           std::vector<BoundaryFace> boundary, int num_nodes)
   : basis_(std::make_shared<NodalBasis>(geom, order)),
     elements_(std::move(elements)),
     boundary_(std::move(boundary)),
     num_nodes_(num_nodes)
{
   if (geom == Geometry::Segment)
   {
      throw Error(ErrorKind::InvalidArgument, "meshes must be 2D or 3D");
   }
   node_elements_.assign(num_nodes_, {});
   const int nw = basis_->size();
   for (int e = 0; e < num_elements(); e++)
   {
      const auto &el = elements_[e];
      if (static_cast<int>(el.nodes.size()) != nw)
      {
         throw Error(ErrorKind::InvalidMesh, "element " + std::to_string(e) +
                     " has " + std::to_string(el.nodes.size()) + " nodes, expected " +
                     std::to_string(nw));
      }
      for (int n : el.nodes)
      {
         if (n < 0 || n >= num_nodes_)
         {
            throw Error(ErrorKind::InvalidMesh, "element " + std::to_string(e) +
                        " references node " + std::to_string(n) + " out of range");
         }
         node_elements_[n].push_back(e);
      }
   }
   for (const auto &bf : boundary_)
   {
      for (int n : bf.nodes)
      {
         if (n < 0 || n >= num_nodes_)
         {
            throw Error(ErrorKind::InvalidMesh, "boundary face references node out of range");
         }
      }
   }
}

const Element &Mesh::element(int e) const
{
   if (e < 0 || e >= num_elements())
   {
      throw Error(ErrorKind::InvalidArgument, "element id " + std::to_string(e) + " out of range");
   }
   return elements_[e];
}

void Mesh::set_attribute(int e, int attribute)
{
   element(e);
   elements_[e].attribute = attribute;
}

std::vector<MeshFace> Mesh::faces() const
{
   std::map<std::vector<int>, MeshFace> by_key;
   for (int e = 0; e < num_elements(); e++)
   {
      for (const auto &lf : basis_->faces())
      {
         std::vector<int> nodes;
         nodes.reserve(lf.size());
         for (int l : lf) { nodes.push_back(elements_[e].nodes[l]); }
         std::vector<int> key = nodes;
         std::sort(key.begin(), key.end());
         auto it = by_key.find(key);
         if (it == by_key.end())
         {
            MeshFace f;
            f.nodes = std::move(nodes);
            f.elem0 = e;
            by_key.emplace(std::move(key), std::move(f));
         }
         else
         {
            if (it->second.elem1 >= 0)
            {
               throw Error(ErrorKind::InvalidMesh, "face shared by more than two elements");
            }
            it->second.elem1 = e;
         }
      }
   }
   std::vector<MeshFace> out;
   out.reserve(by_key.size());
   for (auto &kv : by_key) { out.push_back(std::move(kv.second)); }
   return out;
}

std::vector<int> Mesh::boundary_nodes() const
{
   std::vector<int> nodes;
   for (const auto &bf : boundary_)
   {
      nodes.insert(nodes.end(), bf.nodes.begin(), bf.nodes.end());
   }
   std::sort(nodes.begin(), nodes.end());
   nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
   return nodes;
}

std::vector<int> Mesh::attributes() const
{
   std::vector<int> attrs;
   for (const auto &el : elements_) { attrs.push_back(el.attribute); }
   std::sort(attrs.begin(), attrs.end());
   attrs.erase(std::unique(attrs.begin(), attrs.end()), attrs.end());
   return attrs;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd node_position(const Mesh &mesh, const NodeVector &x, int node)
{
   Eigen::VectorXd p(mesh.dim());
   for (int a = 0; a < mesh.dim(); a++) { p(a) = x(dof_index(mesh, a, node)); }
   return p;
}

void set_node_position(const Mesh &mesh, NodeVector &x, int node,
                       const Eigen::Ref<const Eigen::VectorXd> &p)
{
   for (int a = 0; a < mesh.dim(); a++) { x(dof_index(mesh, a, node)) = p(a); }
}

Eigen::MatrixXd element_coords(const Mesh &mesh, const NodeVector &x, int e)
{
   const auto &el = mesh.element(e);
   const int nw = static_cast<int>(el.nodes.size());
   Eigen::MatrixXd X(mesh.dim(), nw);
   for (int i = 0; i < nw; i++)
   {
      for (int a = 0; a < mesh.dim(); a++) { X(a, i) = x(dof_index(mesh, a, el.nodes[i])); }
   }
   return X;
}

Eigen::VectorXd element_position(const Mesh &mesh, const NodeVector &x, int e,
                                 const Eigen::Ref<const Eigen::VectorXd> &ref)
{
   const auto &basis = mesh.basis();
   Eigen::VectorXd w(basis.size());
   Eigen::MatrixXd g(basis.size(), basis.dim());
   basis.eval_checked(ref, w, g);
   return element_coords(mesh, x, e) * w;
}

ElementJacobian element_jacobian(const Mesh &mesh, const NodeVector &x, int e,
                                 const Eigen::Ref<const Eigen::VectorXd> &ref)
{
   const auto &basis = mesh.basis();
   Eigen::VectorXd w(basis.size());
   Eigen::MatrixXd g(basis.size(), basis.dim());
   basis.eval_checked(ref, w, g);
   ElementJacobian J;
   J.A = element_coords(mesh, x, e) * g;
   J.det = J.A.determinant();
   return J;
}

ValidityReport is_valid(const Mesh &mesh, const NodeVector &x, const QuadratureRule &quad)
{
   const BasisTable table = tabulate(mesh.basis(), quad.points);
   ValidityReport rep;
   rep.min_det = std::numeric_limits<double>::infinity();
   for (int e = 0; e < mesh.num_elements(); e++)
   {
      const Eigen::MatrixXd X = element_coords(mesh, x, e);
      for (int q = 0; q < quad.size(); q++)
      {
         const double det = (X * table.grads[q]).determinant();
         if (!std::isfinite(det))
         {
            rep.min_det = -std::numeric_limits<double>::infinity();
            rep.worst_element = e;
         }
         else if (det < rep.min_det)
         {
            rep.min_det = det;
            rep.worst_element = e;
         }
      }
   }
   rep.valid = std::isfinite(rep.min_det) && rep.min_det > 0.0;
   return rep;
}

Eigen::VectorXd element_volumes(const Mesh &mesh, const NodeVector &x,
                                const QuadratureRule &quad)
{
   const BasisTable table = tabulate(mesh.basis(), quad.points);
   Eigen::VectorXd vol = Eigen::VectorXd::Zero(mesh.num_elements());
   for (int e = 0; e < mesh.num_elements(); e++)
   {
      const Eigen::MatrixXd X = element_coords(mesh, x, e);
      for (int q = 0; q < quad.size(); q++)
      {
         vol(e) += quad.weights(q) * (X * table.grads[q]).determinant();
      }
   }
   return vol;
}

// ---------------------------------------------------------------------------

namespace
{

/// Merges coincident points (within 1e-10) and numbers them in order of first
/// appearance.
class NodeMerger
{
public:
   explicit NodeMerger(int dim) : dim_(dim) {}

   int insert(const Eigen::VectorXd &p)
   {
      const std::array<long long, 3> c = cell(p);
      for (int dx = -1; dx <= 1; dx++)
      {
         for (int dy = -1; dy <= 1; dy++)
         {
            for (int dz = (dim_ == 3 ? -1 : 0); dz <= (dim_ == 3 ? 1 : 0); dz++)
            {
               auto it = grid_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
               if (it == grid_.end()) { continue; }
               for (int id : it->second)
               {
                  if ((points_[id] - p).norm() < 1e-10) { return id; }
               }
            }
         }
      }
      const int id = static_cast<int>(points_.size());
      points_.push_back(p);
      grid_[key(c)].push_back(id);
      return id;
   }

   const std::vector<Eigen::VectorXd> &points() const { return points_; }

private:
   std::array<long long, 3> cell(const Eigen::VectorXd &p) const
   {
      std::array<long long, 3> c{0, 0, 0};
      for (int a = 0; a < dim_; a++) { c[a] = static_cast<long long>(std::floor(p(a) * 1e8)); }
      return c;
   }
   static std::string key(const std::array<long long, 3> &c)
   {
      return std::to_string(c[0]) + ":" + std::to_string(c[1]) + ":" + std::to_string(c[2]);
   }

   int dim_;
   std::vector<Eigen::VectorXd> points_;
   std::unordered_map<std::string, std::vector<int>> grid_;
};

std::vector<BoundaryFace> cartesian_boundary(Geometry geom, int order,
                                              const std::vector<Element> &elements,
                                              int num_nodes, const NodeVector &x, int dim)
{
   Mesh tmp(geom, order, elements, {}, num_nodes);
   std::vector<BoundaryFace> boundary;
   for (const auto &f : tmp.faces())
   {
      if (f.elem1 >= 0) { continue; }
      BoundaryFace bf;
      bf.nodes = f.nodes;
      for (int a = 0; a < dim; a++)
      {
         bool lo = true, hi = true;
         for (int n : f.nodes)
         {
            const double v = x(a * num_nodes + n);
            lo = lo && std::abs(v) < 1e-12;
            hi = hi && std::abs(v - 1.0) < 1e-12;
         }
         if (lo) { bf.attribute = 2 * a + 1; }
         if (hi) { bf.attribute = 2 * a + 2; }
      }
      boundary.push_back(std::move(bf));
   }
   return boundary;
}

} // namespace

MeshData make_cartesian(int dim, int n, int order, Geometry geom)
{
   if (n < 1 || order < 1)
   {
      throw Error(ErrorKind::InvalidArgument, "make_cartesian needs n >= 1 and order >= 1");
   }
   if (dimension(geom) != dim || geom == Geometry::Segment)
   {
      throw Error(ErrorKind::InvalidArgument, std::string("geometry ") + to_string(geom) +
                  " does not match dimension " + std::to_string(dim));
   }
   const double h = 1.0 / n;
   std::vector<Element> elements;

   if (!is_simplex(geom))
   {
      const std::vector<double> gl = gauss_lobatto_nodes(order + 1);
      const int m = n * order + 1;
      const int num_nodes = (dim == 2) ? m * m : m * m * m;
      NodeVector x(dim * num_nodes);
      auto coord = [&](int I)
      {
         const int c = std::min(I / order, n - 1);
         const int l = I - c * order;
         return (c + gl[l]) * h;
      };
      for (int id = 0; id < num_nodes; id++)
      {
         const int I = id % m, J = (id / m) % m, K = id / (m * m);
         x(id) = coord(I);
         x(num_nodes + id) = coord(J);
         if (dim == 3) { x(2 * num_nodes + id) = coord(K); }
      }
      const NodalBasis basis(geom, order);
      const int nz = (dim == 3) ? n : 1;
      for (int ck = 0; ck < nz; ck++)
      {
         for (int cj = 0; cj < n; cj++)
         {
            for (int ci = 0; ci < n; ci++)
            {
               Element el;
               for (const auto &l : basis.lattice())
               {
                  const int I = ci * order + l[0], J = cj * order + l[1];
                  const int K = (dim == 3) ? ck * order + l[2] : 0;
                  el.nodes.push_back(I + m * (J + m * K));
               }
               elements.push_back(std::move(el));
            }
         }
      }
      auto boundary = cartesian_boundary(geom, order, elements, num_nodes, x, dim);
      return {Mesh(geom, order, std::move(elements), std::move(boundary), num_nodes), x};
   }

   const NodalBasis basis(geom, order);
   NodeMerger merger(dim);
   auto add_simplex = [&](const std::vector<Eigen::VectorXd> &v)
   {
      Eigen::MatrixXd edges(dim, dim);
      for (int a = 0; a < dim; a++) { edges.col(a) = v[a + 1] - v[0]; }
      Element el;
      for (int i = 0; i < basis.size(); i++)
      {
         el.nodes.push_back(merger.insert(v[0] + edges * basis.nodes().col(i)));
      }
      elements.push_back(std::move(el));
   };

   if (dim == 2)
   {
      for (int cj = 0; cj < n; cj++)
      {
         for (int ci = 0; ci < n; ci++)
         {
            const Eigen::Vector2d c00(ci * h, cj * h), c10((ci + 1) * h, cj * h),
                  c11((ci + 1) * h, (cj + 1) * h), c01(ci * h, (cj + 1) * h);
            add_simplex({c00, c10, c11});
            add_simplex({c00, c11, c01});
         }
      }
   }
   else
   {
      const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                                     {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
      for (int ck = 0; ck < n; ck++)
      {
         for (int cj = 0; cj < n; cj++)
         {
            for (int ci = 0; ci < n; ci++)
            {
               const Eigen::Vector3d origin(ci * h, cj * h, ck * h);
               for (const auto &p : perms)
               {
                  std::vector<Eigen::VectorXd> v(4, Eigen::VectorXd(origin));
                  for (int s = 0; s < 3; s++)
                  {
                     v[s + 1] = v[s];
                     v[s + 1](p[s]) += h;
                  }
                  Eigen::Matrix3d E;
                  for (int a = 0; a < 3; a++) { E.col(a) = v[a + 1] - v[0]; }
                  if (E.determinant() < 0.0) { std::swap(v[1], v[2]); }
                  add_simplex(v);
               }
            }
         }
      }
   }

   const int num_nodes = static_cast<int>(merger.points().size());
   NodeVector x(dim * num_nodes);
   for (int id = 0; id < num_nodes; id++)
   {
      for (int a = 0; a < dim; a++) { x(a * num_nodes + id) = merger.points()[id](a); }
   }
   auto boundary = cartesian_boundary(geom, order, elements, num_nodes, x, dim);
   return {Mesh(geom, order, std::move(elements), std::move(boundary), num_nodes), x};
}

} // namespace tmopfit
