#include "tmopfit/app.hpp"

#include "tmopfit/error.hpp"

#include <array>
#include <fstream>
#include <map>

namespace tmopfit
{

namespace
{

using Key = std::array<int, 3>;

/// Triangle points in VTK order for lattice coordinates offset by `base`:
/// corners, the three edges in turn, then recursively the interior.
void triangle_order(int p, Key base, std::vector<Key> &out)
{
   if (p < 0) { return; }
   auto at = [&](int i, int j) { return Key{base[0] + i, base[1] + j, 0}; };
   if (p == 0)
   {
      out.push_back(at(0, 0));
      return;
   }
   out.push_back(at(0, 0));
   out.push_back(at(p, 0));
   out.push_back(at(0, p));
   for (int t = 1; t < p; t++) { out.push_back(at(t, 0)); }
   for (int t = 1; t < p; t++) { out.push_back(at(p - t, t)); }
   for (int t = 1; t < p; t++) { out.push_back(at(0, p - t)); }
   triangle_order(p - 3, Key{base[0] + 1, base[1] + 1, 0}, out);
}

int quad_index(int i, int j, int p)
{
   const bool ib = i == 0 || i == p, jb = j == 0 || j == p;
   if (ib && jb) { return i ? (j ? 2 : 1) : (j ? 3 : 0); }
   const int offset = 4;
   if (!ib && jb) { return (i - 1) + (j ? 2 * (p - 1) : 0) + offset; }
   if (ib && !jb) { return (j - 1) + (i ? (p - 1) : 3 * (p - 1)) + offset; }
   return offset + 4 * (p - 1) + (i - 1) + (p - 1) * (j - 1);
}

int hex_index(int i, int j, int k, int p)
{
   const bool ib = i == 0 || i == p, jb = j == 0 || j == p, kb = k == 0 || k == p;
   const int nb = int(ib) + int(jb) + int(kb);
   const int q = p - 1;
   if (nb == 3) { return (i ? (j ? 2 : 1) : (j ? 3 : 0)) + (k ? 4 : 0); }
   int offset = 8;
   if (nb == 2)
   {
      if (!ib) { return (i - 1) + (j ? 2 * q : 0) + (k ? 4 * q : 0) + offset; }
      if (!jb) { return (j - 1) + (i ? q : 3 * q) + (k ? 4 * q : 0) + offset; }
      offset += 8 * q;
      return (k - 1) + q * (i ? (j ? 2 : 1) : (j ? 3 : 0)) + offset;
   }
   offset += 12 * q;
   if (nb == 1)
   {
      if (ib) { return (j - 1) + q * (k - 1) + (i ? q * q : 0) + offset; }
      offset += 2 * q * q;
      if (jb) { return (i - 1) + q * (k - 1) + (j ? q * q : 0) + offset; }
      offset += 2 * q * q;
      return (i - 1) + q * (j - 1) + (k ? q * q : 0) + offset;
   }
   offset += 6 * q * q;
   return offset + (i - 1) + q * ((j - 1) + q * (k - 1));
}

/// Tet points in VTK order up to order 3: corners, edges, face centers.
std::vector<Key> tet_order(int p)
{
   if (p > 3) { throw Error(ErrorKind::InvalidArgument, "vtu: tetrahedra above order 3"); }
   const Key v[4] = {{0, 0, 0}, {p, 0, 0}, {0, p, 0}, {0, 0, p}};
   std::vector<Key> out(v, v + 4);
   const int edges[6][2] = {{0, 1}, {1, 2}, {2, 0}, {0, 3}, {1, 3}, {2, 3}};
   for (const auto &e : edges)
   {
      for (int t = 1; t < p; t++)
      {
         Key k;
         for (int a = 0; a < 3; a++) { k[a] = (v[e[0]][a] * (p - t) + v[e[1]][a] * t) / p; }
         out.push_back(k);
      }
   }
   if (p == 3)
   {
      const int faces[4][3] = {{0, 1, 3}, {1, 2, 3}, {2, 0, 3}, {0, 2, 1}};
      for (const auto &f : faces)
      {
         Key k;
         for (int a = 0; a < 3; a++) { k[a] = (v[f[0]][a] + v[f[1]][a] + v[f[2]][a]) / 3; }
         out.push_back(k);
      }
   }
   return out;
}

} // namespace

int vtk_cell_type(Geometry g)
{
   switch (g)
   {
      case Geometry::Segment: return 68;
      case Geometry::Triangle: return 69;
      case Geometry::Quad: return 70;
      case Geometry::Tet: return 71;
      case Geometry::Hex: return 72;
   }
   return 0;
}

std::vector<int> vtk_node_order(const NodalBasis &basis)
{
   const int p = basis.order();
   const int n = basis.size();
   const auto &lat = basis.lattice();
   std::vector<int> order(n, -1);
   const Geometry g = basis.geometry();
   if (g == Geometry::Quad || g == Geometry::Hex)
   {
      for (int m = 0; m < n; m++)
      {
         const auto &l = lat[m];
         const int v = g == Geometry::Quad ? quad_index(l[0], l[1], p) : hex_index(l[0], l[1], l[2], p);
         order[v] = m;
      }
   }
   else if (g == Geometry::Triangle || g == Geometry::Tet)
   {
      std::vector<Key> keys;
      if (g == Geometry::Triangle) { triangle_order(p, Key{0, 0, 0}, keys); }
      else { keys = tet_order(p); }
      std::map<Key, int> where;
      for (int m = 0; m < n; m++) { where[lat[m]] = m; }
      if (static_cast<int>(keys.size()) != n)
      {
         throw Error(ErrorKind::InvalidArgument, "vtu: unsupported simplex order");
      }
      for (int v = 0; v < n; v++) { order[v] = where.at(keys[v]); }
   }
   else
   {
      throw Error(ErrorKind::InvalidArgument, "vtu: unsupported geometry");
   }
   return order;
}

void write_vtu(std::ostream &os, const Mesh &mesh, const NodeVector &x, const ScalarField &sigma)
{
   const int np = mesh.num_nodes(), nc = mesh.num_elements(), d = mesh.dim();
   if (sigma.coeffs.size() != 0 && sigma.coeffs.size() != np)
   {
      throw Error(ErrorKind::InvalidArgument, "vtu: sigma must have one value per node");
   }
   const std::vector<int> order = vtk_node_order(mesh.basis());
   os.precision(17);
   os << "<?xml version=\"1.0\"?>\n"
      << "<VTKFile type=\"UnstructuredGrid\" version=\"1.0\" byte_order=\"LittleEndian\">\n"
      << "<UnstructuredGrid>\n"
      << "<Piece NumberOfPoints=\"" << np << "\" NumberOfCells=\"" << nc << "\">\n"
      << "<Points>\n<DataArray type=\"Float64\" NumberOfComponents=\"3\" format=\"ascii\">\n";
   for (int i = 0; i < np; i++)
   {
      for (int a = 0; a < 3; a++) { os << (a < d ? x(dof_index(mesh, a, i)) : 0.0) << (a < 2 ? ' ' : '\n'); }
   }
   os << "</DataArray>\n</Points>\n<Cells>\n"
      << "<DataArray type=\"Int64\" Name=\"connectivity\" format=\"ascii\">\n";
   for (int e = 0; e < nc; e++)
   {
      const auto &nodes = mesh.element(e).nodes;
      for (std::size_t m = 0; m < order.size(); m++) { os << nodes[order[m]] << (m + 1 < order.size() ? ' ' : '\n'); }
   }
   os << "</DataArray>\n<DataArray type=\"Int64\" Name=\"offsets\" format=\"ascii\">\n";
   for (int e = 0; e < nc; e++) { os << (e + 1) * static_cast<long>(order.size()) << '\n'; }
   os << "</DataArray>\n<DataArray type=\"UInt8\" Name=\"types\" format=\"ascii\">\n";
   for (int e = 0; e < nc; e++) { os << vtk_cell_type(mesh.geometry()) << '\n'; }
   os << "</DataArray>\n</Cells>\n";
   if (sigma.coeffs.size() == np)
   {
      os << "<PointData Scalars=\"sigma\">\n<DataArray type=\"Float64\" Name=\"sigma\" format=\"ascii\">\n";
      for (int i = 0; i < np; i++) { os << sigma.coeffs(i) << '\n'; }
      os << "</DataArray>\n</PointData>\n";
   }
   os << "<CellData Scalars=\"attribute\">\n<DataArray type=\"Int32\" Name=\"attribute\" format=\"ascii\">\n";
   for (int e = 0; e < nc; e++) { os << mesh.element(e).attribute << '\n'; }
   os << "</DataArray>\n</CellData>\n</Piece>\n</UnstructuredGrid>\n</VTKFile>\n";
}

void write_vtu(const std::string &path, const Mesh &mesh, const NodeVector &x,
               const ScalarField &sigma)
{
   std::ofstream f(path);
   if (!f) { throw Error(ErrorKind::Io, "cannot open " + path + " for writing"); }
   write_vtu(f, mesh, x, sigma);
   if (!f) { throw Error(ErrorKind::Io, "write failed: " + path); }
}

} // namespace tmopfit
