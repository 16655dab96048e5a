#include "tmopfit/error.hpp"
#include "tmopfit/mesh.hpp"

#include <fstream>
#include <iomanip>
#include <cmath>
#include <sstream>

namespace tmopfit
{

namespace
{

constexpr const char *kMagic = "tmopfit-mesh";
constexpr const char *kVersion = "v1";

class LineReader
{
public:
   LineReader(std::istream &in, std::string path) : in_(in), path_(std::move(path)) {}

   /// Next non-empty line; throws a parse error naming `section` at EOF.
   std::string next(const std::string &section)
   {
      std::string line;
      while (std::getline(in_, line))
      {
         line_no_++;
         if (line.find_first_not_of(" \t\r") != std::string::npos) { return line; }
      }
      throw Error(ErrorKind::ParseError, path_ + ": unexpected end of file, missing section '" +
                  section + "' (after line " + std::to_string(line_no_) + ")");
   }

   [[noreturn]] void fail(const std::string &msg) const
   {
      throw Error(ErrorKind::ParseError, path_ + ":" + std::to_string(line_no_) + ": " + msg);
   }

   /// Parses "<keyword> <int>".
   int header(const std::string &keyword)
   {
      std::istringstream ss(next(keyword));
      std::string kw;
      long long v = -1;
      if (!(ss >> kw) || kw != keyword) { fail("expected '" + keyword + "'"); }
      if (!(ss >> v) || v < 0) { fail("expected a nonnegative count after '" + keyword + "'"); }
      return static_cast<int>(v);
   }

   std::vector<long long> ints(const std::string &section, std::size_t count)
   {
      std::istringstream ss(next(section));
      std::vector<long long> out;
      long long v;
      while (ss >> v) { out.push_back(v); }
      if (!ss.eof()) { fail("non-integer token in section '" + section + "'"); }
      if (out.size() != count)
      {
         fail("expected " + std::to_string(count) + " integers in section '" + section +
              "', found " + std::to_string(out.size()));
      }
      return out;
   }

private:
   std::istream &in_;
   std::string path_;
   int line_no_ = 0;
};

} // namespace

void write_mesh(const std::string &path, const Mesh &mesh, const NodeVector &x)
{
   std::ofstream out(path);
   if (!out) { throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing"); }
   out << kMagic << " " << kVersion << "\n";
   out << "dim " << mesh.dim() << "\n";
   out << "order " << mesh.order() << "\n";
   out << "geom " << to_string(mesh.geometry()) << "\n";
   out << "elements " << mesh.num_elements() << "\n";
   for (const auto &el : mesh.elements())
   {
      out << el.attribute;
      for (int n : el.nodes) { out << " " << n; }
      out << "\n";
   }
   out << "boundary " << mesh.boundary().size() << "\n";
   for (const auto &bf : mesh.boundary())
   {
      out << bf.attribute;
      for (int n : bf.nodes) { out << " " << n; }
      out << "\n";
   }
   out << "nodes " << mesh.num_nodes() << "\n";
   out << std::setprecision(17);
   for (int i = 0; i < mesh.num_nodes(); i++)
   {
      for (int a = 0; a < mesh.dim(); a++)
      {
         out << (a ? " " : "") << x(dof_index(mesh, a, i));
      }
      out << "\n";
   }
   if (!out) { throw Error(ErrorKind::Io, "write to '" + path + "' failed"); }
}

MeshData read_mesh(const std::string &path)
{
   std::ifstream in(path);
   if (!in) { throw Error(ErrorKind::Io, "cannot open '" + path + "'"); }
   LineReader rd(in, path);

   {
      std::istringstream ss(rd.next("header"));
      std::string magic, version;
      ss >> magic >> version;
      if (magic != kMagic) { rd.fail("not a tmopfit mesh file"); }
      if (version != kVersion)
      {
         throw Error(ErrorKind::VersionMismatch, path + ": unsupported version '" + version +
                     "', expected " + kVersion);
      }
   }
   const int dim = rd.header("dim");
   const int order = rd.header("order");
   Geometry geom;
   {
      std::istringstream ss(rd.next("geom"));
      std::string kw, name;
      if (!(ss >> kw >> name) || kw != "geom") { rd.fail("expected 'geom <name>'"); }
      try { geom = geometry_from_string(name); }
      catch (const Error &) { rd.fail("unknown geometry '" + name + "'"); }
   }
   if (dimension(geom) != dim) { rd.fail("geometry does not match dim"); }
   const NodalBasis basis(geom, order);

   const int ne = rd.header("elements");
   std::vector<Element> elements(ne);
   for (int e = 0; e < ne; e++)
   {
      const auto v = rd.ints("elements", basis.size() + 1);
      elements[e].attribute = static_cast<int>(v[0]);
      elements[e].nodes.assign(v.begin() + 1, v.end());
   }
   const int nb = rd.header("boundary");
   std::vector<BoundaryFace> boundary(nb);
   const std::size_t face_size = basis.faces().front().size();
   for (int b = 0; b < nb; b++)
   {
      const auto v = rd.ints("boundary", face_size + 1);
      boundary[b].attribute = static_cast<int>(v[0]);
      boundary[b].nodes.assign(v.begin() + 1, v.end());
   }
   const int nn = rd.header("nodes");
   NodeVector x(dim * nn);
   for (int i = 0; i < nn; i++)
   {
      std::istringstream ss(rd.next("nodes"));
      for (int a = 0; a < dim; a++)
      {
         double v;
         if (!(ss >> v)) { rd.fail("expected " + std::to_string(dim) + " coordinates"); }
         if (!std::isfinite(v)) { rd.fail("non-finite coordinate"); }
         x(a * nn + i) = v;
      }
   }
   return {Mesh(geom, order, std::move(elements), std::move(boundary), nn), x};
}

} // namespace tmopfit
