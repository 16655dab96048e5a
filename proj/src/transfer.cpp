#include "tmopfit/transfer.hpp"

#include "tmopfit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tmopfit
{

namespace
{

constexpr double kInflate = 0.1;
constexpr int kMaxNewton = 50;
constexpr double kInsideTol = 1e-9;
constexpr double kAcceptTol = 1e-10;
constexpr double kProjectTol = 1e-8;

} // namespace

Locator::Locator(const Mesh &mesh, const NodeVector &x) : mesh_(&mesh), x_(x)
{
   const int d = mesh.dim();
   const int ne = mesh.num_elements();
   const auto &b = mesh.basis();
   coords_.resize(ne);
   boxes_.resize(ne);
   domain_ = Eigen::AlignedBox<double, Eigen::Dynamic>(d);

   // sample element images at nodes and quadrature points
   const auto quad = quadrature_for(mesh.geometry(), mesh.order());
   const BasisTable tab = tabulate(b, quad.points);
   for (int e = 0; e < ne; e++)
   {
      coords_[e] = element_coords(mesh, x_, e);
      Eigen::AlignedBox<double, Eigen::Dynamic> box(d);
      for (int i = 0; i < b.size(); i++) { box.extend(coords_[e].col(i)); }
      const Eigen::MatrixXd qp = coords_[e] * tab.values;
      for (int q = 0; q < qp.cols(); q++) { box.extend(qp.col(q)); }
      const Eigen::VectorXd pad = kInflate * box.sizes();
      box.min() -= pad;
      box.max() += pad;
      boxes_[e] = box;
      domain_.extend(box);
   }
   size_ = domain_.sizes().maxCoeff();

   const int per_axis =
      2 * std::max(1, static_cast<int>(std::ceil(std::pow(double(ne), 1.0 / d))));
   cells_.setOnes();
   for (int a = 0; a < d; a++) { cells_(a) = per_axis; }
   grid_.assign(cells_.prod(), {});
   for (int e = 0; e < ne; e++)
   {
      Eigen::Array3i lo = Eigen::Array3i::Zero(), hi = Eigen::Array3i::Zero();
      for (int a = 0; a < d; a++)
      {
         const double w = domain_.sizes()(a) / cells_(a);
         lo(a) = std::clamp(int((boxes_[e].min()(a) - domain_.min()(a)) / w), 0, cells_(a) - 1);
         hi(a) = std::clamp(int((boxes_[e].max()(a) - domain_.min()(a)) / w), 0, cells_(a) - 1);
      }
      for (int k = lo(2); k <= hi(2); k++)
         for (int j = lo(1); j <= hi(1); j++)
            for (int i = lo(0); i <= hi(0); i++)
            {
               grid_[i + cells_(0) * (j + cells_(1) * k)].push_back(e);
            }
   }
}

int Locator::cell_index(const Eigen::Ref<const Eigen::VectorXd> &p) const
{
   int idx[3] = {0, 0, 0};
   for (int a = 0; a < p.size(); a++)
   {
      if (p(a) < domain_.min()(a) || p(a) > domain_.max()(a)) { return -1; }
      const double w = domain_.sizes()(a) / cells_(a);
      idx[a] = std::clamp(int((p(a) - domain_.min()(a)) / w), 0, cells_(a) - 1);
   }
   return idx[0] + cells_(0) * (idx[1] + cells_(1) * idx[2]);
}

const std::vector<int> &Locator::candidates(const Eigen::Ref<const Eigen::VectorXd> &p) const
{
   const int c = cell_index(p);
   return c < 0 ? empty_ : grid_[c];
}

PointLocation Locator::invert(int e, const Eigen::Ref<const Eigen::VectorXd> &p) const
{
   const auto &b = mesh_->basis();
   const int d = b.dim();
   const Eigen::MatrixXd &X = coords_[e];
   Eigen::VectorXd w(b.size());
   Eigen::MatrixXd g(b.size(), d);

   auto residual = [&](const Eigen::VectorXd &r, Eigen::MatrixXd *A)
   {
      b.eval(r, w, g);
      if (A) { *A = X * g; }
      return Eigen::VectorXd(X * w - p);
   };

   Eigen::VectorXd ref = b.center();
   Eigen::MatrixXd A;
   Eigen::VectorXd res = residual(ref, &A);
   double rn = res.norm();
   const double stop = 1e-3 * kAcceptTol * size_;
   for (int it = 0; it < kMaxNewton && rn > stop; it++)
   {
      Eigen::VectorXd step = A.partialPivLu().solve(-res);
      if (!step.allFinite()) { break; }
      bool improved = false;
      for (int h = 0; h < 30; h++)
      {
         const Eigen::VectorXd trial = b.clamp(ref + step);
         const Eigen::VectorXd tr = residual(trial, nullptr);
         if (tr.norm() < rn)
         {
            ref = trial;
            res = residual(ref, &A);
            rn = res.norm();
            improved = true;
            break;
         }
         step *= 0.5;
      }
      if (!improved) { break; }
   }

   PointLocation loc;
   loc.element = e;
   loc.ref = ref;
   loc.distance = rn;
   loc.status = (rn < kAcceptTol * size_ && b.contains(ref, kInsideTol))
                   ? LocationStatus::Interior
                   : LocationStatus::NotFound;
   return loc;
}

PointLocation Locator::locate(const Eigen::Ref<const Eigen::VectorXd> &p) const
{
   PointLocation best;
   best.distance = std::numeric_limits<double>::infinity();
   for (int e : candidates(p))
   {
      PointLocation loc = invert(e, p);
      if (loc.status == LocationStatus::Interior) { return loc; }
      if (loc.distance < best.distance) { best = loc; }
   }
   if (best.element < 0)
   {
      // no candidate boxes: distance to the nearest element box
      best.distance = std::numeric_limits<double>::infinity();
      for (const auto &box : boxes_) 
      {
         best.distance = std::min(best.distance, box.exteriorDistance(p));
      }
      best.status = LocationStatus::NotFound;
      return best;
   }
   best.status = best.distance <= kProjectTol * size_ ? LocationStatus::BoundaryProjected
                                                      : LocationStatus::NotFound;
   return best;
}

std::vector<PointLocation> Locator::locate_all(const Eigen::Ref<const Eigen::VectorXd> &p) const
{
   std::vector<PointLocation> out;
   for (int e : candidates(p))
   {
      PointLocation loc = invert(e, p);
      if (loc.status == LocationStatus::Interior) { out.push_back(std::move(loc)); }
   }
   return out;
}

double interpolate(const ScalarField &sigma0, const Locator &loc,
                   const Eigen::Ref<const Eigen::VectorXd> &p)
{
   const PointLocation l = loc.locate(p);
   if (l.status == LocationStatus::NotFound)
   {
      std::ostringstream ss;
      ss << "point (" << p.transpose() << ") not found, distance " << l.distance;
      throw Error(ErrorKind::TransferFailure, ss.str());
   }
   return eval(sigma0, loc.mesh(), loc.nodes(), l.element, l.ref);
}

Eigen::VectorXd interpolate_points(const ScalarField &sigma0, const Locator &loc,
                                   const Eigen::MatrixXd &points)
{
   Eigen::VectorXd v(points.cols());
   for (int i = 0; i < points.cols(); i++) { v(i) = interpolate(sigma0, loc, points.col(i)); }
   return v;
}

ScalarField transfer_field(const ScalarField &sigma0, const Locator &initial, const Mesh &mesh,
                           const NodeVector &x)
{
   ScalarField out;
   out.coeffs.resize(mesh.num_nodes());
   std::vector<int> failed;
   for (int i = 0; i < mesh.num_nodes(); i++)
   {
      const Eigen::VectorXd p = node_position(mesh, x, i);
      const PointLocation l = initial.locate(p);
      if (l.status == LocationStatus::NotFound)
      {
         failed.push_back(i);
         continue;
      }
      out.coeffs(i) = eval(sigma0, initial.mesh(), initial.nodes(), l.element, l.ref);
   }
   if (!failed.empty())
   {
      std::ostringstream ss;
      ss << "transfer_field: " << failed.size() << " node(s) outside the initial domain:";
      for (std::size_t k = 0; k < std::min<std::size_t>(failed.size(), 10); k++)
      {
         ss << " " << failed[k];
      }
      throw Error(ErrorKind::TransferFailure, ss.str());
   }
   return out;
}

} // namespace tmopfit
