#include "tmopfit/quality.hpp"

#include <cctype>

namespace tmopfit
{

int metric_number(MetricId id)
{
   switch (id)
   {
      case MetricId::Mu2: return 2;
      case MetricId::Mu58: return 58;
      case MetricId::Mu77: return 77;
      case MetricId::Mu80: return 80;
      case MetricId::Mu302: return 302;
      case MetricId::Mu316: return 316;
      case MetricId::Mu333: return 333;
   }
   return 0;
}

std::string to_string(MetricId id) { return "mu" + std::to_string(metric_number(id)); }

MetricId metric_from_string(const std::string &s)
{
   std::string t = s;
   if (t.size() > 2 && std::tolower(t[0]) == 'm' && std::tolower(t[1]) == 'u') { t = t.substr(2); }
   for (MetricId id : {MetricId::Mu2, MetricId::Mu58, MetricId::Mu77, MetricId::Mu80,
                       MetricId::Mu302, MetricId::Mu316, MetricId::Mu333})
   {
      if (t == std::to_string(metric_number(id))) { return id; }
   }
   throw Error(ErrorKind::InvalidArgument, "unknown metric '" + s + "'");
}

bool metric_is_shape(MetricId id)
{
   return id == MetricId::Mu2 || id == MetricId::Mu58 || id == MetricId::Mu302;
}

bool metric_defined_in(MetricId id, int dim)
{
   switch (id)
   {
      case MetricId::Mu2:
      case MetricId::Mu58:
      case MetricId::Mu80: return dim == 2;
      case MetricId::Mu302:
      case MetricId::Mu333: return dim == 3;
      case MetricId::Mu77:
      case MetricId::Mu316: return dim == 2 || dim == 3;
   }
   return false;
}

std::string to_string(TargetKind k)
{
   return k == TargetKind::IdealShapeUnitSize ? "ideal-shape-unit-size"
                                              : "ideal-shape-initial-size";
}

TargetKind target_kind_from_string(const std::string &s)
{
   if (s == "ideal-shape-unit-size" || s == "unit-size") { return TargetKind::IdealShapeUnitSize; }
   if (s == "ideal-shape-initial-size" || s == "initial-size")
   {
      return TargetKind::IdealShapeInitialSize;
   }
   throw Error(ErrorKind::InvalidArgument, "unknown target kind '" + s + "'");
}

Eigen::MatrixXd ideal_target(Geometry g)
{
   const double s3 = std::sqrt(3.0);
   switch (g)
   {
      case Geometry::Triangle:
      {
         Eigen::MatrixXd W(2, 2);
         W << 1.0, 0.5, 0.0, s3 / 2;
         return W;
      }
      case Geometry::Tet:
      {
         Eigen::MatrixXd W(3, 3);
         W << 1.0, 0.5, 0.5, 0.0, s3 / 2, s3 / 6, 0.0, 0.0, std::sqrt(6.0) / 3;
         return W;
      }
      default: return Eigen::MatrixXd::Identity(dimension(g), dimension(g));
   }
}

TargetJacobian make_targets(const Mesh &mesh, const NodeVector &x0, TargetKind kind,
                            const QuadratureRule &quad)
{
   const auto validity = is_valid(mesh, x0, quad);
   if (!validity.valid)
   {
      throw Error(ErrorKind::InvalidMesh, "make_targets: initial mesh has det A <= 0 in element " +
                                             std::to_string(validity.worst_element));
   }
   const int d = mesh.dim();
   const Eigen::MatrixXd Wideal = ideal_target(mesh.geometry());
   const double det_ideal = Wideal.determinant();
   const double vref = reference_volume(mesh.geometry());

   TargetJacobian t;
   t.kind = kind;
   const int ne = mesh.num_elements();
   t.W.resize(ne);
   t.Winv.resize(ne);
   t.det.resize(ne);
   Eigen::VectorXd vol;
   if (kind == TargetKind::IdealShapeInitialSize) { vol = element_volumes(mesh, x0, quad); }
   for (int e = 0; e < ne; e++)
   {
      double s = 1.0;
      if (kind == TargetKind::IdealShapeInitialSize) { s = vol(e) / (vref * det_ideal); }
      t.W[e] = std::pow(s, 1.0 / d) * Wideal;
      t.Winv[e] = t.W[e].inverse();
      t.det[e] = t.W[e].determinant();
   }
   return t;
}

} // namespace tmopfit
