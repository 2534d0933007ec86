#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "twohand/mesh.hpp"
#include "twohand/sdf.hpp"

using namespace twohand;

namespace {

double max_value(const VoxelSdf& s)
{
    return *std::max_element(s.values.begin(), s.values.end());
}

std::filesystem::path temp_path(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("twohand_test_" + name);
}

}  // namespace

TEST_SUITE("sdf")
{
    TEST_CASE("mesh helpers")
    {
        const TriangleMesh box = make_box(Vec3(-1, -1, -1), Vec3(1, 1, 1));
        CHECK(box.vertices.rows() == 8);
        CHECK(box.faces.size() == 12);
        CHECK(is_watertight(box.faces));
        const TriangleMesh sphere = make_icosphere(4);
        CHECK(sphere.vertices.rows() == 2562);
        CHECK((sphere.vertices.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK(is_watertight(sphere.faces));

        Faces open = box.faces;
        open.pop_back();
        CHECK_FALSE(is_watertight(open));
        CHECK_THROWS_AS(analyze_topology(open, 8), TopologyError);
        CHECK_THROWS_AS(analyze_topology(box.faces, 7), InvalidArgument);

        Faces two = box.faces;
        for (const Face& f : box.faces)
            two.push_back({f[0] + 8, f[1] + 8, f[2] + 8});
        CHECK(analyze_topology(two, 16).component_count == 2);
        CHECK(flip_winding(flip_winding(box.faces)) == box.faces);
    }

    TEST_CASE("closest point on a triangle")
    {
        const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> u(-1.0, 2.0);
        for (int trial = 0; trial < 1000; ++trial) {
            const Vec3 p(u(rng), u(rng), u(rng));
            const Vec3 w = closest_point_barycentric(p, a, b, c);
            CHECK(w.minCoeff() >= 0.0);
            CHECK(w.sum() == doctest::Approx(1.0));
            const Vec3 q = w[0] * a + w[1] * b + w[2] * c;
            CHECK((p - q).norm() == doctest::Approx(oracle::triangle_distance(p, a, b, c)).epsilon(1e-12));
        }
    }

    TEST_CASE("grid config validation")
    {
        CHECK_NOTHROW(validate(GridConfig{}));
        CHECK_THROWS_AS(validate(GridConfig{7, 2}), InvalidArgument);
        CHECK_THROWS_AS(validate(GridConfig{32, 1}), InvalidArgument);
        CHECK_THROWS_AS(validate(GridConfig{8, 4}), InvalidArgument);
    }

    TEST_CASE("unit cube center voxel sits half a unit deep")
    {
        const TriangleMesh cube = make_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
        const VoxelSdf s = voxelize_sdf(cube.vertices, cube.faces, GridConfig{33, 2});
        CHECK(s.center(16, 16, 16).norm() < 1e-12);
        CHECK(s.value(16, 16, 16) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(max_value(s) == doctest::Approx(0.5).epsilon(1e-12));
        // every voxel against the analytic box depth
        double worst = 0.0;
        for (int i = 0; i < 33; ++i)
            for (int j = 0; j < 33; ++j)
                for (int k = 0; k < 33; ++k) {
                    const Vec3 p = s.center(i, j, k);
                    const double depth = 0.5 - p.cwiseAbs().maxCoeff();
                    const double expected = depth > 1e-9 ? depth : 0.0;
                    if (std::abs(depth) > 1e-9)
                        worst = std::max(worst, std::abs(s.value(i, j, k) - expected));
                }
        CHECK(worst < 1e-12);
    }

    TEST_CASE("grid invariants: non-negative, zero outside and on the boundary")
    {
        const TriangleMesh sphere = make_icosphere(3, 0.05, Vec3(0.01, -0.02, 0.03));
        const VoxelSdf s = voxelize_sdf(sphere.vertices, sphere.faces, GridConfig{24, 2});
        CHECK(s.values.size() == 24u * 24u * 24u);
        const int n = s.resolution;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    CHECK_FALSE(s.value(i, j, k) < 0.0);
                    const bool boundary = i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1;
                    if (boundary)
                        CHECK(s.value(i, j, k) == 0.0);
                }

        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> u(-0.12, 0.12);
        int outside = 0;
        for (int trial = 0; trial < 10000; ++trial) {
            const Vec3 p = Vec3(u(rng), u(rng), u(rng));
            const double v = sample_psi(s, p);
            CHECK_FALSE(v < 0.0);
            // beyond one cell diagonal of the surface every corner is exterior
            if ((p - Vec3(0.01, -0.02, 0.03)).norm() > 0.05 + std::sqrt(3.0) * s.cell_size) {
                ++outside;
                CHECK(v == 0.0);
            }
        }
        CHECK(outside > 5000);
    }

    TEST_CASE("sphere interior matches the analytic depth within two cells")
    {
        const TriangleMesh sphere = make_icosphere(4);
        const VoxelSdf s = voxelize_sdf(sphere.vertices, sphere.faces, GridConfig{32, 2});
        std::mt19937_64 rng(43);
        std::normal_distribution<double> n(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double worst = 0.0;
        for (int trial = 0; trial < 2000; ++trial) {
            const double r = 0.95 * std::cbrt(u(rng));
            const Vec3 p = Vec3(n(rng), n(rng), n(rng)).normalized() * r;
            worst = std::max(worst, std::abs(sample_psi(s, p) - (1.0 - r)));
        }
        CHECK(worst <= 2.0 * s.cell_size);
    }

    TEST_CASE("voxel values match a brute-force mesh distance")
    {
        const TriangleMesh sphere = make_icosphere(2, 1.0);
        const VoxelSdf s = voxelize_sdf(sphere.vertices, sphere.faces, GridConfig{16, 2});
        double worst = 0.0;
        int inside = 0;
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j)
                for (int k = 0; k < 16; ++k) {
                    const Vec3 p = s.center(i, j, k);
                    const bool in = oracle::inside_convex(p, sphere.vertices, sphere.faces);
                    const double expected = in ? oracle::mesh_distance(p, sphere.vertices, sphere.faces) : 0.0;
                    if (in && expected < 1e-9)
                        continue;
                    inside += in;
                    worst = std::max(worst, std::abs(s.value(i, j, k) - expected));
                }
        CHECK(inside > 100);
        CHECK(worst < 1e-12);
    }

    TEST_CASE("voxelization is deterministic")
    {
        const TriangleMesh sphere = make_icosphere(3, 0.3);
        const VoxelSdf a = voxelize_sdf(sphere.vertices, sphere.faces, GridConfig{});
        const VoxelSdf b = voxelize_sdf(sphere.vertices, sphere.faces, GridConfig{});
        CHECK(a.values == b.values);
        CHECK(a.signature == b.signature);
    }

    TEST_CASE("overlapping components take the deeper value")
    {
        const TriangleMesh a = make_box(Vec3(0, 0, 0), Vec3(1, 1, 1));
        const TriangleMesh b = make_box(Vec3(0.5, 0, 0), Vec3(1.5, 1, 1));
        Points v(16, 3);
        v << a.vertices, b.vertices;
        Faces f = a.faces;
        for (const Face& face : b.faces)
            f.push_back({face[0] + 8, face[1] + 8, face[2] + 8});
        const VoxelSdf s = voxelize_sdf(v, f, GridConfig{33, 2});
        // x = 0.75 is 0.25 deep in the first box and 0.25 in the second; y, z depth 0.5
        const Vec3 p(0.75, 0.5, 0.5);
        CHECK(sample_psi(s, p) == doctest::Approx(0.25).epsilon(1e-9));
        CHECK(sample_psi(s, Vec3(0.25, 0.5, 0.5)) == doctest::Approx(0.25).epsilon(1e-9));
        // every node holds the deeper of the two analytic box depths
        double worst = 0.0;
        for (int ix = 0; ix < s.resolution; ++ix)
            for (int iy = 0; iy < s.resolution; ++iy)
                for (int iz = 0; iz < s.resolution; ++iz) {
                    const Vec3 c = s.center(ix, iy, iz);
                    const double yz = std::min({c.y(), 1.0 - c.y(), c.z(), 1.0 - c.z()});
                    const double da = std::min(yz, std::min(c.x(), 1.0 - c.x()));
                    const double db = std::min(yz, std::min(c.x() - 0.5, 1.5 - c.x()));
                    worst = std::max(worst, std::abs(s.value(ix, iy, iz) - std::max({da, db, 0.0})));
                }
        CHECK(worst < 1e-12);
    }

    TEST_CASE("open meshes are rejected")
    {
        TriangleMesh box = make_box(Vec3(0, 0, 0), Vec3(1, 1, 1));
        box.faces.pop_back();
        CHECK_THROWS_AS(voxelize_sdf(box.vertices, box.faces, GridConfig{}), TopologyError);
    }

    TEST_CASE("trilinear sampling")
    {
        VoxelSdf s;
        s.resolution = 8;
        s.cell_size = 0.5;
        s.origin = Vec3(1.0, 2.0, 3.0);
        s.values.assign(512, 0.0);
        std::mt19937_64 rng(44);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 1; i < 7; ++i)
            for (int j = 1; j < 7; ++j)
                for (int k = 1; k < 7; ++k)
                    s.values[s.index(i, j, k)] = u(rng);

        CHECK(sample_psi(s, s.center(3, 4, 2)) == s.value(3, 4, 2));
        const Vec3 mid = 0.5 * (s.center(3, 4, 2) + s.center(4, 4, 2));
        CHECK(sample_psi(s, mid) == doctest::Approx(0.5 * (s.value(3, 4, 2) + s.value(4, 4, 2))).epsilon(1e-14));
        CHECK(sample_psi(s, Vec3(-5, 0, 0)) == 0.0);
        CHECK(sample_psi(s, s.origin + Vec3(100, 1, 1)) == 0.0);
        CHECK_FALSE(sample_psi_detail(s, Vec3(-5, 0, 0)).in_grid);

        // gradient matches differences away from cell faces; continuity across faces
        for (int trial = 0; trial < 200; ++trial) {
            const Vec3 p = s.origin + Vec3(u(rng), u(rng), u(rng)) * 3.5;
            const PsiSample d = sample_psi_detail(s, p);
            const Vec3 f = d.fraction;
            if ((f.array() < 1e-3).any() || (f.array() > 1 - 1e-3).any())
                continue;
            for (int a = 0; a < 3; ++a) {
                const double h = 1e-7;
                const double fd = (sample_psi(s, p + h * Vec3::Unit(a)) - sample_psi(s, p - h * Vec3::Unit(a))) / (2 * h);
                CHECK(d.gradient[a] == doctest::Approx(fd).epsilon(1e-6));
            }
        }
        const Vec3 face = s.center(3, 3, 3) + Vec3(0.0, 0.2, 0.1);
        CHECK(std::abs(sample_psi(s, face + Vec3(1e-12, 0, 0)) - sample_psi(s, face - Vec3(1e-12, 0, 0))) < 1e-10);
    }

    TEST_CASE("binary dump round-trips with the documented layout")
    {
        const TriangleMesh sphere = make_icosphere(2, 0.2);
        const VoxelSdf s = voxelize_sdf(sphere.vertices, sphere.faces, GridConfig{12, 2});
        const auto path = temp_path("grid.sdf");
        write_sdf_binary(s, path.string());
        CHECK(std::filesystem::file_size(path) == 8 + 8 + 24 + 8 + 8 * 12 * 12 * 12);
        std::ifstream in(path, std::ios::binary);
        char magic[8];
        in.read(magic, 8);
        CHECK(std::string(magic, 8) == "TWHSDF01");
        std::uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), 8);
        CHECK(n == 12u);
        in.close();

        const VoxelSdf back = read_sdf_binary(path.string());
        CHECK(back.resolution == 12);
        CHECK(back.origin == s.origin);
        CHECK(back.cell_size == s.cell_size);
        CHECK(back.values == s.values);
        std::filesystem::remove(path);

        const auto bad = temp_path("bad.sdf");
        std::ofstream(bad, std::ios::binary) << "NOTASDF0";
        CHECK_THROWS(read_sdf_binary(bad.string()));
        std::filesystem::remove(bad);
    }
}
