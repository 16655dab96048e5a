#pragma once

#include "tmopfit/fe.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace tmopfit
{

/// Global node coordinates, component-major: all x_1 entries, then x_2, ...
/// Length dim * num_nodes.
using NodeVector = Eigen::VectorXd;

struct Element
{
   int attribute = 1;
   std::vector<int> nodes;   ///< global node index per local basis node
};

struct BoundaryFace
{
   int attribute = 1;
   std::vector<int> nodes;
};

/// A face of the mesh with its one or two adjacent elements.
struct MeshFace
{
   std::vector<int> nodes;
   int elem0 = -1;
   int elem1 = -1;   ///< -1 on the domain boundary
};

/// Continuous high-order mesh with a single element type.
class Mesh
{
public:
   Mesh(Geometry geom, int order, std::vector<Element> elements,
        std::vector<BoundaryFace> boundary, int num_nodes);

   Geometry geometry() const { return basis_->geometry(); }
   int dim() const { return basis_->dim(); }
   int order() const { return basis_->order(); }
   int num_elements() const { return static_cast<int>(elements_.size()); }
   int num_nodes() const { return num_nodes_; }
   int num_dofs() const { return dim() * num_nodes_; }

   const NodalBasis &basis() const { return *basis_; }
   const std::vector<Element> &elements() const { return elements_; }
   const Element &element(int e) const;
   void set_attribute(int e, int attribute);
   const std::vector<BoundaryFace> &boundary() const { return boundary_; }

   /// Elements adjacent to each node.
   const std::vector<std::vector<int>> &node_elements() const { return node_elements_; }
   /// All faces, each listed once.
   std::vector<MeshFace> faces() const;
   /// Sorted unique node indices on boundary faces.
   std::vector<int> boundary_nodes() const;
   std::vector<int> attributes() const;

private:
   std::shared_ptr<const NodalBasis> basis_;
   std::vector<Element> elements_;
   std::vector<BoundaryFace> boundary_;
   int num_nodes_;
   std::vector<std::vector<int>> node_elements_;
};

/// Mesh together with its node positions.
struct MeshData
{
   Mesh mesh;
   NodeVector nodes;
};

inline int dof_index(const Mesh &mesh, int component, int node)
{
   return component * mesh.num_nodes() + node;
}

Eigen::VectorXd node_position(const Mesh &mesh, const NodeVector &x, int node);
void set_node_position(const Mesh &mesh, NodeVector &x, int node,
                       const Eigen::Ref<const Eigen::VectorXd> &p);

/// Element control points as a dim x N_w matrix.
Eigen::MatrixXd element_coords(const Mesh &mesh, const NodeVector &x, int e);

Eigen::VectorXd element_position(const Mesh &mesh, const NodeVector &x, int e,
                                 const Eigen::Ref<const Eigen::VectorXd> &ref);

struct ElementJacobian
{
   Eigen::MatrixXd A;
   double det = 0.0;
};

ElementJacobian element_jacobian(const Mesh &mesh, const NodeVector &x, int e,
                                 const Eigen::Ref<const Eigen::VectorXd> &ref);

struct ValidityReport
{
   bool valid = true;
   double min_det = 0.0;
   int worst_element = -1;
};

/// det A > 0 at every point of `quad` in every element.
ValidityReport is_valid(const Mesh &mesh, const NodeVector &x, const QuadratureRule &quad);

/// Per-element integral of det A.
Eigen::VectorXd element_volumes(const Mesh &mesh, const NodeVector &x,
                                const QuadratureRule &quad);

/// Unit square/cube split into n^d cells; quads/hexes directly, or 2 triangles
/// per square / 6 tets per cube.
MeshData make_cartesian(int dim, int n, int order, Geometry geom);

void write_mesh(const std::string &path, const Mesh &mesh, const NodeVector &x);
MeshData read_mesh(const std::string &path);

} // namespace tmopfit
