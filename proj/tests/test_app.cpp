#include "doctest.h"

#include "tmopfit/app.hpp"
#include "tmopfit/error.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tmopfit;
using Eigen::VectorXd;

namespace
{

int count(const std::string &s, const std::string &needle)
{
   int n = 0;
   for (std::size_t p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) { n++; }
   return n;
}

/// Whitespace-separated numbers of the DataArray named `name`.
std::vector<double> data_array(const std::string &vtu, const std::string &name)
{
   const std::size_t at = vtu.find("Name=\"" + name + "\"");
   REQUIRE(at != std::string::npos);
   const std::size_t open = vtu.find('>', at) + 1;
   const std::size_t close = vtu.find("</DataArray>", open);
   std::istringstream in(vtu.substr(open, close - open));
   std::vector<double> v;
   for (double x; in >> x;) { v.push_back(x); }
   return v;
}

MeshData single(Geometry g, int order)
{
   return make_cartesian(dimension(g), 1, order, g);
}

} // namespace

TEST_CASE("built-in level sets")
{
   const auto s2 = builtin_levelset("sphere", 2);
   CHECK(s2->value(VectorXd((VectorXd(2) << 0.5, 0.9).finished())) == doctest::Approx(0.1).epsilon(1e-14));
   CHECK(std::abs(s2->value(VectorXd((VectorXd(2) << 0.8, 0.5).finished()))) < 1e-15);
   const auto rt = builtin_levelset("rt", 2);
   CHECK(std::abs(rt->value(VectorXd((VectorXd(2) << 0.0, 0.62).finished()))) < 1e-15);
   const auto rt3 = builtin_levelset("rt", 3);
   CHECK(std::abs(rt3->value(VectorXd((VectorXd(3) << 0.0, 0.37, 0.62).finished()))) < 1e-15);

   // r(theta) = 0.3 + 0.08 cos(4 theta): 0.38 along the axes, 0.22 on the diagonals
   const auto tg = builtin_levelset("tg", 2);
   CHECK(std::abs(tg->value(VectorXd((VectorXd(2) << 0.88, 0.5).finished()))) < 1e-14);
   const double q = 0.22 / std::sqrt(2.0);
   CHECK(std::abs(tg->value(VectorXd((VectorXd(2) << 0.5 + q, 0.5 + q).finished()))) < 1e-14);
   const auto tg3 = builtin_levelset("tg", 3);
   CHECK(std::abs(tg3->value(VectorXd((VectorXd(3) << 0.88, 0.5, 0.9).finished()))) < 1e-14);

   CHECK_THROWS_AS(builtin_levelset("torus", 2), Error);
}

TEST_CASE("extruded level set derivatives match its base")
{
   const auto tg3 = builtin_levelset("tg", 3);
   const VectorXd p = (VectorXd(3) << 0.71, 0.43, 0.2).finished();
   const double h = 1e-5;
   for (int a = 0; a < 3; a++)
   {
      VectorXd pp = p, pm = p;
      pp(a) += h;
      pm(a) -= h;
      CHECK(tg3->gradient(p)(a) == doctest::Approx((tg3->value(pp) - tg3->value(pm)) / (2 * h)).epsilon(1e-8));
      const VectorXd col = (tg3->gradient(pp) - tg3->gradient(pm)) / (2 * h);
      for (int b = 0; b < 3; b++) { CHECK(tg3->hessian(p)(b, a) == doctest::Approx(col(b)).epsilon(1e-6)); }
   }
   CHECK(tg3->gradient(p)(2) == 0.0);
}

TEST_CASE("e_S is the mean squared distance from the sphere")
{
   MeshData md = single(Geometry::Quad, 1);
   const VectorXd c = VectorXd::Constant(2, 0.0);
   set_node_position(md.mesh, md.nodes, 0, VectorXd((VectorXd(2) << 0.31, 0.0).finished()));
   set_node_position(md.mesh, md.nodes, 1, VectorXd((VectorXd(2) << 0.0, 0.29).finished()));
   CHECK(compute_e_S(md.mesh, md.nodes, {0}, c, 0.3) == doctest::Approx(1e-4).epsilon(1e-10));
   CHECK(compute_e_S(md.mesh, md.nodes, {0, 1}, c, 0.3) == doctest::Approx(1e-4).epsilon(1e-10));
   set_node_position(md.mesh, md.nodes, 2, VectorXd((VectorXd(2) << 0.18, 0.24).finished()));
   CHECK(compute_e_S(md.mesh, md.nodes, {2}, c, 0.3) < 1e-30);
   CHECK_THROWS_AS(compute_e_S(md.mesh, md.nodes, {}, c, 0.3), Error);
}

TEST_CASE("E uses magnitudes")
{
   const InterfaceError e = compute_E((VectorXd(2) << 0.02, 0.04).finished());
   CHECK(e.avg == doctest::Approx(0.03));
   CHECK(e.max == doctest::Approx(0.04));
   const InterfaceError m = compute_E((VectorXd(2) << -0.02, 0.04).finished());
   CHECK(m.avg == doctest::Approx(0.03));
   const InterfaceError one = compute_E((VectorXd(1) << -0.5).finished());
   CHECK(one.avg == one.max);
   const InterfaceError zero = compute_E(VectorXd::Zero(3));
   CHECK(zero.avg == 0.0);
   CHECK(zero.max == 0.0);
   CHECK_THROWS_AS(compute_E(VectorXd()), Error);
}

TEST_CASE("interface modes recover a sampled graph")
{
   MeshData md = make_cartesian(2, 8, 3, Geometry::Quad);
   MarkedSet S;
   for (int i = 0; i < md.mesh.num_nodes(); i++)
   {
      VectorXd p = node_position(md.mesh, md.nodes, i);
      if (std::abs(p(1) - 0.5) > 1e-12) { continue; }
      p(1) = 0.45 + 0.07 * std::cos(2 * M_PI * p(0)) - 0.01 * std::cos(10 * M_PI * p(0));
      set_node_position(md.mesh, md.nodes, i, p);
      S.push_back(i);
   }
   const VectorXd a = interface_modes(md.mesh, md.nodes, S, {2.0, 10.0});
   CHECK(a(0) == doctest::Approx(0.45).epsilon(1e-10));
   CHECK(a(1) == doctest::Approx(0.07).epsilon(1e-10));
   CHECK(a(2) == doctest::Approx(-0.01).epsilon(1e-10));
}

TEST_CASE("vtk node order is a permutation with vertices first")
{
   for (Geometry g : {Geometry::Quad, Geometry::Triangle, Geometry::Hex, Geometry::Tet})
   {
      for (int p = 1; p <= 3; p++)
      {
         CAPTURE(to_string(g));
         CAPTURE(p);
         MeshData md = single(g, p);
         const NodalBasis &basis = md.mesh.basis();
         std::vector<int> order = vtk_node_order(basis);
         REQUIRE(static_cast<int>(order.size()) == basis.size());
         std::vector<int> sorted = order;
         std::sort(sorted.begin(), sorted.end());
         for (int i = 0; i < basis.size(); i++) { CHECK(sorted[i] == i); }

         // VTK corner positions of the reference element
         const int nv = g == Geometry::Quad ? 4 : g == Geometry::Triangle ? 3 : g == Geometry::Hex ? 8 : 4;
         const double corners[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                       {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
         const double simplex[4][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
         for (int v = 0; v < nv; v++)
         {
            const auto &lat = basis.lattice()[order[v]];
            for (int a = 0; a < dimension(g); a++)
            {
               const double want = is_simplex(g) ? simplex[v][a] : corners[v][a];
               CHECK(lat[a] == static_cast<int>(want * p));
            }
         }
      }
   }
   CHECK_THROWS_AS(vtk_node_order(single(Geometry::Tet, 4).mesh.basis()), Error);
}

TEST_CASE("vtk quad order 2 follows corners, edges, center")
{
   MeshData md = single(Geometry::Quad, 2);
   const auto &lat = md.mesh.basis().lattice();
   const std::vector<int> order = vtk_node_order(md.mesh.basis());
   const int want[9][2] = {{0, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 0}, {2, 1}, {1, 2}, {0, 1}, {1, 1}};
   for (int m = 0; m < 9; m++)
   {
      CHECK(lat[order[m]][0] == want[m][0]);
      CHECK(lat[order[m]][1] == want[m][1]);
   }
}

TEST_CASE("vtu output")
{
   SUBCASE("order-1 quad: 4 points, 1 cell")
   {
      MeshData md = single(Geometry::Quad, 1);
      ScalarField s = project(*builtin_levelset("sphere", 2), md.mesh, md.nodes);
      std::ostringstream os;
      write_vtu(os, md.mesh, md.nodes, s);
      const std::string v = os.str();
      CHECK(v.find("NumberOfPoints=\"4\" NumberOfCells=\"1\"") != std::string::npos);
      CHECK(data_array(v, "types") == std::vector<double>{70});
      CHECK(data_array(v, "offsets") == std::vector<double>{4});
      CHECK(data_array(v, "sigma").size() == 4);
      CHECK(data_array(v, "attribute").size() == 1);
   }
   SUBCASE("order-3 quad cell has 16 points")
   {
      MeshData md = make_cartesian(2, 2, 3, Geometry::Quad);
      ScalarField s = project(*builtin_levelset("sphere", 2), md.mesh, md.nodes);
      std::ostringstream os;
      write_vtu(os, md.mesh, md.nodes, s);
      const std::string v = os.str();
      CHECK(data_array(v, "offsets") == std::vector<double>{16, 32, 48, 64});
      CHECK(data_array(v, "connectivity").size() == 64);
      CHECK(static_cast<int>(data_array(v, "sigma").size()) == md.mesh.num_nodes());
      // points padded to 3 components
      CHECK(count(v, "NumberOfComponents=\"3\"") == 1);
   }
   SUBCASE("sigma of the wrong length is rejected")
   {
      MeshData md = single(Geometry::Hex, 2);
      ScalarField s;
      s.coeffs = VectorXd::Zero(5);
      std::ostringstream os;
      CHECK_THROWS_AS(write_vtu(os, md.mesh, md.nodes, s), Error);
   }
   SUBCASE("unwritable path")
   {
      MeshData md = single(Geometry::Tet, 1);
      CHECK_THROWS_AS(write_vtu("/nonexistent/dir/out.vtu", md.mesh, md.nodes, ScalarField{}), Error);
   }
}

TEST_CASE("report json round trip")
{
   FitReport r;
   r.case_name = "tg2d";
   r.F0 = 0.1234567890123456789;
   r.F_final = 1e-17;
   r.F_decrease_pct = 99.99999999999;
   r.e_S = std::numeric_limits<double>::quiet_NaN();
   r.E_avg = 3.3e-3;
   r.E_max = 7.1e-2;
   r.iterations = 17;
   r.wall_time_s = 2.5;
   r.termination = "converged";
   const std::string text = to_json(r);
   for (const char *key : {"case", "F0", "F_final", "F_decrease_pct", "e_S", "E_avg", "E_max", "iterations", "wall_time_s"})
   {
      CHECK(text.find(std::string("\"") + key + "\"") != std::string::npos);
   }
   const FitReport b = fit_report_from_json(text);
   CHECK(b.case_name == r.case_name);
   CHECK(b.F0 == r.F0);
   CHECK(b.F_final == r.F_final);
   CHECK(b.F_decrease_pct == r.F_decrease_pct);
   CHECK(std::isnan(b.e_S));
   CHECK(b.E_avg == r.E_avg);
   CHECK(b.E_max == r.E_max);
   CHECK(b.iterations == r.iterations);
   CHECK(b.wall_time_s == r.wall_time_s);
   CHECK(b.termination == r.termination);
   CHECK(to_json(b) == text);

   CHECK_THROWS_AS(fit_report_from_json("{not json"), Error);
   CHECK_THROWS_AS(fit_report_from_json("{\"case\": \"x\"}"), Error);
}

TEST_CASE("named cases")
{
   CHECK(case_names().size() == 8);
   for (const auto &name : case_names())
   {
      const TestCase tc = named_case(name);
      CHECK(tc.name == name);
      CHECK(dimension(tc.geometry) == tc.dim);
      CHECK(metric_defined_in(tc.metric.id, tc.dim));
   }
   CHECK(named_case("fit2d-quad").order == 3);
   CHECK(named_case("fit2d-tri").metric.id == MetricId::Mu58);
   CHECK(named_case("fit3d-tet").order == 2);
   CHECK(named_case("fit3d-hex").weight == 1000.0);
   CHECK(named_case("tg2d").order == 3);
   CHECK(named_case("tg2d").mode == InterfaceMode::Relax);
   CHECK(named_case("rt2d").order == 2);
   CHECK(named_case("rt2d").weight == 1e4);
   CHECK_THROWS_AS(named_case("fit4d"), Error);
   CHECK(interface_mode_from_string("fixed") == InterfaceMode::Fixed);
   CHECK(std::string(to_string(InterfaceMode::Relax)) == "relax");
   CHECK_THROWS_AS(interface_mode_from_string("loose"), Error);
}

TEST_CASE("run_case on a small fitting problem writes its outputs")
{
   TestCase tc = named_case("fit2d-quad");
   tc.res = 4;
   tc.order = 2;
   const auto dir = std::filesystem::temp_directory_path() / "tmopfit_test_app_run";
   std::filesystem::remove_all(dir);
   const CaseResult r = run_case(tc, dir.string());
   CHECK(r.report.F_final < r.report.F0);
   CHECK(r.report.F_decrease_pct > 0.0);
   CHECK(r.report.e_S >= 0.0);
   CHECK(r.report.E_max >= r.report.E_avg);
   CHECK(r.report.termination == "converged");
   CHECK(static_cast<int>(r.sigma_final.coeffs.size()) == r.initial.mesh.num_nodes());
   for (const char *f : {"mesh_initial.mesh", "mesh_final.mesh", "initial.vtu", "final.vtu", "history.csv", "report.json"})
   {
      CHECK(std::filesystem::exists(dir / f));
   }
   std::ifstream js(dir / "report.json");
   const std::string text((std::istreambuf_iterator<char>(js)), std::istreambuf_iterator<char>());
   CHECK(fit_report_from_json(text).F_final == r.report.F_final);
   const MeshData back = read_mesh((dir / "mesh_final.mesh").string());
   CHECK((back.nodes - r.final_nodes).norm() < 1e-12);
   std::filesystem::remove_all(dir);
}

TEST_CASE("fixed interface keeps the marked nodes in place")
{
   TestCase tc = named_case("tg2d");
   tc.res = 6;
   tc.order = 2;
   tc.mode = InterfaceMode::Fixed;
   const CaseResult r = run_case(tc);
   for (int s : r.S)
   {
      CHECK((node_position(r.initial.mesh, r.final_nodes, s) - node_position(r.initial.mesh, r.initial.nodes, s))
               .norm() == 0.0);
   }
   CHECK(r.report.E_max < 1e-12);
}

TEST_CASE("aligned relaxation meshes start on the interface")
{
   for (const std::string name : {"tg2d", "rt2d", "rt3d"})
   {
      CAPTURE(name);
      TestCase tc = named_case(name);
      tc.res = name == "rt3d" ? 4 : 8;
      tc.solver.max_iterations = 1;
      const CaseResult r = run_case(tc);
      const auto ls = builtin_levelset(tc.levelset, tc.dim);
      double worst = 0.0;
      for (int s : r.S) { worst = std::max(worst, std::abs(ls->value(node_position(r.initial.mesh, r.initial.nodes, s)))); }
      CHECK(worst < 1e-9);
      CHECK(is_valid(r.initial.mesh, r.initial.nodes, quadrature_for(tc.geometry, tc.order)).valid);
   }
}

TEST_CASE("Newton and L-BFGS agree on the 2D circle fit")
{
   TestCase tc = named_case("fit2d-quad");
   const CaseResult newton = run_case(tc);
   tc.solver.method = Method::LBFGS;
   tc.solver.max_iterations = 2000;
   const CaseResult lbfgs = run_case(tc);
   CHECK(lbfgs.report.F_final == doctest::Approx(newton.report.F_final).epsilon(0.01));
}
