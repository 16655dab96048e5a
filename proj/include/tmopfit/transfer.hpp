#pragma once

#include "tmopfit/fields.hpp"
#include "tmopfit/mesh.hpp"

#include <Eigen/Geometry>

#include <vector>

namespace tmopfit
{

enum class LocationStatus { Interior, BoundaryProjected, NotFound };

struct PointLocation
{
   int element = -1;
   Eigen::VectorXd ref;
   LocationStatus status = LocationStatus::NotFound;
   double distance = 0.0;   ///< residual |x(ref) - p| of the best candidate
};

/// Point location by inverse isoparametric mapping. Keeps a reference to
/// `mesh` and a copy of the node positions.
class Locator
{
public:
   Locator(const Mesh &mesh, const NodeVector &x);

   const Mesh &mesh() const { return *mesh_; }
   const NodeVector &nodes() const { return x_; }
   double domain_size() const { return size_; }

   /// Bounding box of element e, inflated by 10% of its extent.
   const Eigen::AlignedBox<double, Eigen::Dynamic> &box(int e) const { return boxes_[e]; }
   /// Elements whose boxes overlap the grid cell containing p.
   const std::vector<int> &candidates(const Eigen::Ref<const Eigen::VectorXd> &p) const;

   PointLocation locate(const Eigen::Ref<const Eigen::VectorXd> &p) const;
   /// Every element containing p (several on shared faces); empty if none.
   std::vector<PointLocation> locate_all(const Eigen::Ref<const Eigen::VectorXd> &p) const;

   /// Inverts the map of a single element. Returns the clamped reference
   /// point with the smallest residual found.
   PointLocation invert(int e, const Eigen::Ref<const Eigen::VectorXd> &p) const;

private:
   const Mesh *mesh_;
   NodeVector x_;
   std::vector<Eigen::MatrixXd> coords_;
   std::vector<Eigen::AlignedBox<double, Eigen::Dynamic>> boxes_;
   Eigen::AlignedBox<double, Eigen::Dynamic> domain_;
   double size_ = 1.0;
   Eigen::Array3i cells_ = Eigen::Array3i::Ones();
   std::vector<std::vector<int>> grid_;
   std::vector<int> empty_;

   int cell_index(const Eigen::Ref<const Eigen::VectorXd> &p) const;
};

/// sigma0 (living on the locator's mesh) at a physical point. Throws
/// transfer-failure if the point cannot be located.
double interpolate(const ScalarField &sigma0, const Locator &loc,
                   const Eigen::Ref<const Eigen::VectorXd> &p);
Eigen::VectorXd interpolate_points(const ScalarField &sigma0, const Locator &loc,
                                   const Eigen::MatrixXd &points);

/// Field on the current mesh with coefficient i = sigma0(x_i). Throws
/// transfer-failure listing the nodes that could not be located.
ScalarField transfer_field(const ScalarField &sigma0, const Locator &initial, const Mesh &mesh,
                           const NodeVector &x);

} // namespace tmopfit
