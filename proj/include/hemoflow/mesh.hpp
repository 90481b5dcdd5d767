#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "hemoflow/field.hpp"

namespace hemo {

// Boundary tags. Outlets are numbered from 1 so a mesh can carry several.
inline constexpr int kTagWall = 0;
inline constexpr int kTagInlet = 1;
inline constexpr int outlet_tag(int k) { return 1 + k; }

struct BoundaryFacet {
    std::array<int, 3> v{};  ///< ordered so the right-hand normal points outward
    int tag = kTagWall;
    int owner = -1;  ///< adjacent tetrahedron
};

/// Tetrahedral mesh with a tagged, watertight boundary. Vertex coordinates
/// are in cm; every boundary triangle belongs to exactly one tagged facet.
struct SimplexMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 4>> tets;
    std::vector<BoundaryFacet> facets;

    double tet_volume(int e) const {
        const auto& t = tets[e];
        Vec3 a = vertices[t[1]] - vertices[t[0]];
        Vec3 b = vertices[t[2]] - vertices[t[0]];
        Vec3 c = vertices[t[3]] - vertices[t[0]];
        return a.cross(b).dot(c) / 6.0;
    }

    double total_volume() const {
        double v = 0.0;
        for (int e = 0; e < static_cast<int>(tets.size()); ++e) v += tet_volume(e);
        return v;
    }

    Vec3 facet_normal(int f) const {
        const auto& fc = facets[f];
        Vec3 n = (vertices[fc.v[1]] - vertices[fc.v[0]])
                     .cross(vertices[fc.v[2]] - vertices[fc.v[0]]);
        return n.normalized();
    }

    double facet_area(int f) const {
        const auto& fc = facets[f];
        return 0.5 * (vertices[fc.v[1]] - vertices[fc.v[0]])
                         .cross(vertices[fc.v[2]] - vertices[fc.v[0]])
                         .norm();
    }

    double tag_area(int tag) const {
        double a = 0.0;
        for (int f = 0; f < static_cast<int>(facets.size()); ++f)
            if (facets[f].tag == tag) a += facet_area(f);
        return a;
    }

    /// Full structural check: element positivity, watertight boundary whose
    /// triangles coincide with the tagged facet list, and outward normals.
    void validate() const;
};

namespace detail {

inline std::array<int, 3> face_key(int a, int b, int c) {
    std::array<int, 3> k{a, b, c};
    std::sort(k.begin(), k.end());
    return k;
}

/// Faces of tet (v0,v1,v2,v3) wound so right-hand normals point out of it.
inline std::array<std::array<int, 3>, 4> tet_faces(const std::array<int, 4>& t) {
    return {{{t[0], t[2], t[1]}, {t[0], t[1], t[3]}, {t[1], t[2], t[3]}, {t[0], t[3], t[2]}}};
}

}  // namespace detail

inline void SimplexMesh::validate() const {
    require(!vertices.empty() && !tets.empty(), errc::domain, "mesh is empty");
    const int nv = static_cast<int>(vertices.size());
    double scale = 0.0;
    for (const auto& t : tets)
        for (int i : t) {
            require(i >= 0 && i < nv, errc::domain, "tet vertex index out of range");
            scale = std::max(scale, vertices[i].cwiseAbs().maxCoeff());
        }
    double vol_floor = 1e-14 * scale * scale * scale;
    for (int e = 0; e < static_cast<int>(tets.size()); ++e)
        require(tet_volume(e) > vol_floor, errc::domain,
                "degenerate or inverted tet " + std::to_string(e));

    // Boundary = faces owned by exactly one tet; they must match the tagged
    // facet list one-to-one.
    std::map<std::array<int, 3>, int> count;
    for (const auto& t : tets)
        for (const auto& f : detail::tet_faces(t)) ++count[detail::face_key(f[0], f[1], f[2])];
    std::size_t boundary = 0;
    for (const auto& [key, c] : count) {
        require(c <= 2, errc::domain, "face shared by more than two tets");
        if (c == 1) ++boundary;
    }
    require(boundary == facets.size(), errc::domain,
            "tagged facets do not cover the boundary exactly");

    std::map<std::array<int, 3>, bool> seen;
    for (int f = 0; f < static_cast<int>(facets.size()); ++f) {
        const auto& fc = facets[f];
        auto key = detail::face_key(fc.v[0], fc.v[1], fc.v[2]);
        auto it = count.find(key);
        require(it != count.end() && it->second == 1, errc::domain,
                "facet " + std::to_string(f) + " is not a boundary face");
        require(!seen[key], errc::domain, "duplicate boundary facet");
        seen[key] = true;
        require(fc.tag >= 0, errc::domain, "negative facet tag");
        require(fc.owner >= 0 && fc.owner < static_cast<int>(tets.size()), errc::domain,
                "facet owner out of range");
        Vec3 centroid = (vertices[fc.v[0]] + vertices[fc.v[1]] + vertices[fc.v[2]]) / 3.0;
        const auto& t = tets[fc.owner];
        Vec3 tc = (vertices[t[0]] + vertices[t[1]] + vertices[t[2]] + vertices[t[3]]) / 4.0;
        require(facet_normal(f).dot(centroid - tc) > 0.0, errc::domain,
                "facet normal points into the mesh");
    }
}

namespace detail {

/// Orients a tet positively (swaps two vertices if needed).
inline void orient_tet(const std::vector<Vec3>& verts, std::array<int, 4>& t) {
    Vec3 a = verts[t[1]] - verts[t[0]];
    Vec3 b = verts[t[2]] - verts[t[0]];
    Vec3 c = verts[t[3]] - verts[t[0]];
    if (a.cross(b).dot(c) < 0.0) std::swap(t[2], t[3]);
}

/// Splits the prism (bottom b0,b1,b2 / top t0,t1,t2) into three tets using
/// the smallest-global-index diagonal on each quad face, which makes the
/// split agree between prisms sharing that face.
inline std::array<std::array<int, 4>, 3> split_prism(const std::array<int, 6>& p) {
    // Rotations (and upside-down flips that preserve orientation) bringing
    // each corner to position 0.
    static constexpr std::array<std::array<int, 6>, 6> perms{{{0, 1, 2, 3, 4, 5},
                                                              {1, 2, 0, 4, 5, 3},
                                                              {2, 0, 1, 5, 3, 4},
                                                              {3, 5, 4, 0, 2, 1},
                                                              {4, 3, 5, 1, 0, 2},
                                                              {5, 4, 3, 2, 1, 0}}};
    int min_pos = 0;
    for (int i = 1; i < 6; ++i)
        if (p[i] < p[min_pos]) min_pos = i;
    std::array<int, 6> v;
    for (int i = 0; i < 6; ++i) v[i] = p[perms[min_pos][i]];

    // The only ambiguous quad after the rotation is (v1, v2, v5, v4).
    if (std::min(v[1], v[5]) < std::min(v[2], v[4]))
        return {{{v[0], v[1], v[2], v[5]}, {v[0], v[1], v[5], v[4]}, {v[0], v[4], v[5], v[3]}}};
    return {{{v[0], v[1], v[2], v[4]}, {v[0], v[4], v[2], v[5]}, {v[0], v[4], v[5], v[3]}}};
}

/// Collects single-owner faces, winds them outward, and tags them with the
/// supplied classifier (facet centroid -> tag).
template <class Classifier>
void finalize_boundary(SimplexMesh& mesh, Classifier&& tag_of) {
    std::map<std::array<int, 3>, std::pair<int, std::array<int, 3>>> owner;
    for (int e = 0; e < static_cast<int>(mesh.tets.size()); ++e)
        for (const auto& f : tet_faces(mesh.tets[e])) {
            auto key = face_key(f[0], f[1], f[2]);
            auto it = owner.find(key);
            if (it == owner.end())
                owner[key] = {e, f};
            else
                it->second.first = -1;  // interior
        }
    mesh.facets.clear();
    for (const auto& [key, of] : owner) {
        if (of.first < 0) continue;
        BoundaryFacet fc;
        fc.v = of.second;  // wound outward by construction of tet_faces
        fc.owner = of.first;
        Vec3 c =
            (mesh.vertices[fc.v[0]] + mesh.vertices[fc.v[1]] + mesh.vertices[fc.v[2]]) / 3.0;
        fc.tag = tag_of(c);
        mesh.facets.push_back(fc);
    }
}

}  // namespace detail

/// Structured tetrahedral mesh of a straight pipe of radius R and length L
/// along +z. The disk is a center fan plus n_radial rings of n_theta nodes;
/// each extruded prism splits into three tets. Tags: inlet at z = 0,
/// outlet 1 at z = L, wall on the lateral surface.
inline SimplexMesh build_pipe_mesh(double radius, double length, int n_theta, int n_radial,
                                   int n_axial) {
    require(radius > 0.0 && length > 0.0, errc::config, "pipe mesh needs positive dimensions");
    require(n_theta >= 3 && n_radial >= 1 && n_axial >= 1, errc::config,
            "pipe mesh resolution too small");

    SimplexMesh mesh;
    const int n_disk = 1 + n_radial * n_theta;
    auto disk_node = [&](int ring, int slot) {
        return ring == 0 ? 0 : 1 + (ring - 1) * n_theta + (slot % n_theta);
    };
    for (int layer = 0; layer <= n_axial; ++layer) {
        double z = length * layer / n_axial;
        mesh.vertices.push_back({0.0, 0.0, z});
        for (int ring = 1; ring <= n_radial; ++ring) {
            double r = radius * ring / n_radial;
            for (int s = 0; s < n_theta; ++s) {
                double th = 2.0 * M_PI * s / n_theta;
                mesh.vertices.push_back({r * std::cos(th), r * std::sin(th), z});
            }
        }
    }

    // One fixed disk triangulation, replicated on every layer.
    std::vector<std::array<int, 3>> tris;
    for (int s = 0; s < n_theta; ++s)
        tris.push_back({disk_node(0, 0), disk_node(1, s), disk_node(1, s + 1)});
    for (int ring = 1; ring < n_radial; ++ring)
        for (int s = 0; s < n_theta; ++s) {
            int a = disk_node(ring, s), b = disk_node(ring, s + 1);
            int c = disk_node(ring + 1, s + 1), d = disk_node(ring + 1, s);
            // Split the annulus quad along the diagonal through its smallest
            // index (same rule the prisms use for their vertical faces).
            if (std::min(a, c) < std::min(b, d)) {
                tris.push_back({a, b, c});
                tris.push_back({a, c, d});
            } else {
                tris.push_back({a, b, d});
                tris.push_back({b, c, d});
            }
        }

    for (int layer = 0; layer < n_axial; ++layer) {
        int lo = layer * n_disk, hi = lo + n_disk;
        for (const auto& t : tris) {
            std::array<int, 6> prism{lo + t[0], lo + t[1], lo + t[2],
                                     hi + t[0], hi + t[1], hi + t[2]};
            for (auto tet : detail::split_prism(prism)) {
                detail::orient_tet(mesh.vertices, tet);
                mesh.tets.push_back(tet);
            }
        }
    }

    double ztol = 1e-9 * length;
    detail::finalize_boundary(mesh, [&](const Vec3& c) {
        if (c.z() < ztol) return kTagInlet;
        if (c.z() > length - ztol) return outlet_tag(1);
        return kTagWall;
    });
    mesh.validate();
    return mesh;
}

/// Structured tetrahedral mesh of the box [0,lx] x [-h,h] x [0,lz] with each
/// grid cell split into six tets around its main diagonal (conforming across
/// cells). Tags: inlet at x = 0, outlet 1 at x = lx, wall elsewhere; the box
/// matches the slab-channel convention (plates at y = -h and y = +h).
inline SimplexMesh build_box_mesh(double lx, double h, double lz, int nx, int ny, int nz) {
    require(lx > 0.0 && h > 0.0 && lz > 0.0, errc::config, "box mesh needs positive dimensions");
    require(nx >= 1 && ny >= 1 && nz >= 1, errc::config, "box mesh resolution too small");

    SimplexMesh mesh;
    auto vid = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i)
                mesh.vertices.push_back(
                    {lx * i / nx, -h + 2.0 * h * j / ny, lz * k / nz});

    // Six tets per cell: one per permutation of the unit steps, all sharing
    // the cell's main diagonal.
    static constexpr std::array<std::array<int, 3>, 6> orders{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                for (const auto& ord : orders) {
                    std::array<int, 3> at{i, j, k};
                    std::array<int, 4> tet;
                    tet[0] = vid(at[0], at[1], at[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++at[ord[s]];
                        tet[s + 1] = vid(at[0], at[1], at[2]);
                    }
                    detail::orient_tet(mesh.vertices, tet);
                    mesh.tets.push_back(tet);
                }

    double xtol = 1e-9 * lx;
    detail::finalize_boundary(mesh, [&](const Vec3& c) {
        if (c.x() < xtol) return kTagInlet;
        if (c.x() > lx - xtol) return outlet_tag(1);
        return kTagWall;
    });
    mesh.validate();
    return mesh;
}

/// Plain-text mesh format:
///   hfmesh 1
///   vertices <N>      followed by N lines "x y z"
///   tets <M>          followed by M lines "a b c d"
///   facets <K>        followed by K lines "v0 v1 v2 tag"
/// Facet owners and outward winding are reconstructed on read.
inline void write_mesh(const SimplexMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) raise(errc::io, "cannot write mesh: " + path);
    os.precision(17);
    os << "hfmesh 1\n";
    os << "vertices " << mesh.vertices.size() << "\n";
    for (const auto& v : mesh.vertices) os << v.x() << " " << v.y() << " " << v.z() << "\n";
    os << "tets " << mesh.tets.size() << "\n";
    for (const auto& t : mesh.tets) os << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
    os << "facets " << mesh.facets.size() << "\n";
    for (const auto& f : mesh.facets)
        os << f.v[0] << " " << f.v[1] << " " << f.v[2] << " " << f.tag << "\n";
    if (!os) raise(errc::io, "short write on mesh: " + path);
}

inline SimplexMesh read_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) raise(errc::io, "cannot read mesh: " + path);
    std::string magic;
    int version = 0;
    is >> magic >> version;
    if (magic != "hfmesh") raise(errc::format, "not a mesh file: " + path);
    if (version != 1) raise(errc::format, "unsupported mesh version in " + path);

    auto expect = [&](const char* word) {
        std::string s;
        std::size_t n = 0;
        if (!(is >> s >> n) || s != word)
            raise(errc::format, std::string("mesh file missing '") + word + "' section: " + path);
        return n;
    };

    SimplexMesh mesh;
    std::size_t nv = expect("vertices");
    mesh.vertices.resize(nv);
    for (auto& v : mesh.vertices)
        if (!(is >> v.x() >> v.y() >> v.z()))
            raise(errc::format, "truncated vertex block in " + path);
    std::size_t nt = expect("tets");
    mesh.tets.resize(nt);
    for (auto& t : mesh.tets)
        if (!(is >> t[0] >> t[1] >> t[2] >> t[3]))
            raise(errc::format, "truncated tet block in " + path);
    std::size_t nf = expect("facets");

    // Tags keyed by sorted vertex triple; geometry (owner, winding) rebuilt.
    std::map<std::array<int, 3>, int> tags;
    for (std::size_t f = 0; f < nf; ++f) {
        int a, b, c, tag;
        if (!(is >> a >> b >> c >> tag))
            raise(errc::format, "truncated facet block in " + path);
        tags[detail::face_key(a, b, c)] = tag;
    }
    detail::finalize_boundary(mesh, [](const Vec3&) { return kTagWall; });
    require(mesh.facets.size() == nf, errc::format,
            "facet list does not match the mesh boundary in " + path);
    for (auto& f : mesh.facets) {
        auto it = tags.find(detail::face_key(f.v[0], f.v[1], f.v[2]));
        require(it != tags.end(), errc::format,
                "facet list does not match the mesh boundary in " + path);
        f.tag = it->second;
    }
    mesh.validate();
    return mesh;
}

}  // namespace hemo
