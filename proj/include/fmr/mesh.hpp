#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fmr/common.hpp"

namespace fmr {

// Triangle mesh with positions and CCW vertex-index triples. Vertex order is
// the identity used by all correspondence files; it is never reordered.
struct TriangleMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;

    int n() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
};

inline double face_area(const TriangleMesh& mesh, int f) {
    const auto& t = mesh.faces[f];
    Eigen::Vector3d e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
    Eigen::Vector3d e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
    return 0.5 * e1.cross(e2).norm();
}

inline double total_area(const TriangleMesh& mesh) {
    double a = 0.0;
    for (int f = 0; f < mesh.face_count(); ++f) a += face_area(mesh, f);
    return a;
}

// Checks index ranges, face degeneracy, edge manifoldness and connectivity.
// Throws ValidationError naming the first offending element.
inline void validate_mesh(const TriangleMesh& mesh) {
    const int n = mesh.n();
    if (n < 3) throw ValidationError("mesh has fewer than 3 vertices");
    if (mesh.faces.empty()) throw ValidationError("mesh has no faces");

    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& t = mesh.faces[f];
        for (int c = 0; c < 3; ++c) {
            if (t[c] < 0 || t[c] >= n)
                throw ValidationError("face " + std::to_string(f) + ": vertex index " +
                                      std::to_string(t[c]) + " out of range [0, " +
                                      std::to_string(n) + ")");
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw ValidationError("face " + std::to_string(f) + ": repeated vertex index");
        if (face_area(mesh, f) <= 1e-12)
            throw ValidationError("face " + std::to_string(f) + ": degenerate (area below 1e-12)");
    }

    // Each undirected edge must be shared by at most two faces.
    std::map<std::pair<int, int>, int> edge_count;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& t = mesh.faces[f];
        for (int c = 0; c < 3; ++c) {
            int a = t[c], b = t[(c + 1) % 3];
            if (a > b) std::swap(a, b);
            if (++edge_count[{a, b}] > 2)
                throw ValidationError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                      ") of face " + std::to_string(f) +
                                      " shared by more than 2 faces (non-manifold)");
        }
    }

    // Single connected component over the edge graph.
    std::vector<int> stack{0};
    std::vector<char> seen(n, 0);
    std::vector<std::vector<int>> adj(n);
    for (const auto& [e, c] : edge_count) {
        adj[e.first].push_back(e.second);
        adj[e.second].push_back(e.first);
    }
    seen[0] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : adj[v])
            if (!seen[w]) {
                seen[w] = 1;
                stack.push_back(w);
            }
    }
    for (int v = 0; v < n; ++v)
        if (!seen[v])
            throw ValidationError("vertex " + std::to_string(v) +
                                  " disconnected from vertex 0 (mesh not connected)");
}

namespace detail {

inline std::string next_content_line(std::istream& in, const char* what) {
    std::string line;
    while (std::getline(in, line)) {
        // strip comments and whitespace-only lines
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") != std::string::npos) return line;
    }
    throw ParseError(std::string("unexpected end of file while reading ") + what);
}

inline double parse_double(const std::string& tok, const char* what) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw ParseError("bad number '" + tok + "' in " + what);
    return v;
}

inline long parse_int(const std::string& tok, const char* what) {
    char* end = nullptr;
    long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0')
        throw ParseError("bad integer '" + tok + "' in " + what);
    return v;
}

} // namespace detail

inline TriangleMesh load_off(std::istream& in) {
    std::string header = detail::next_content_line(in, "OFF header");
    std::istringstream hs(header);
    std::string magic;
    hs >> magic;
    if (magic != "OFF") throw ParseError("missing OFF magic, got '" + magic + "'");

    long nv, nf, ne;
    {
        std::string counts;
        // counts may share the header line ("OFF 8 12 0") or follow it
        if (!(hs >> nv)) {
            counts = detail::next_content_line(in, "OFF counts");
            std::istringstream cs(counts);
            if (!(cs >> nv >> nf >> ne)) throw ParseError("malformed OFF count line");
        } else if (!(hs >> nf >> ne)) {
            throw ParseError("malformed OFF count line");
        }
    }
    if (nv <= 0 || nf < 0) throw ParseError("bad OFF vertex/face counts");

    TriangleMesh mesh;
    mesh.vertices.reserve(nv);
    for (long i = 0; i < nv; ++i) {
        std::istringstream ls(detail::next_content_line(in, "OFF vertex"));
        std::string xs, ys, zs;
        if (!(ls >> xs >> ys >> zs)) throw ParseError("malformed OFF vertex " + std::to_string(i));
        mesh.vertices.emplace_back(detail::parse_double(xs, "OFF vertex"),
                                   detail::parse_double(ys, "OFF vertex"),
                                   detail::parse_double(zs, "OFF vertex"));
    }
    for (long f = 0; f < nf; ++f) {
        std::istringstream ls(detail::next_content_line(in, "OFF face"));
        long cnt, a, b, c;
        if (!(ls >> cnt >> a >> b >> c) || cnt != 3)
            throw ParseError("OFF face " + std::to_string(f) + ": only triangles supported");
        mesh.faces.push_back({static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)});
    }
    return mesh;
}

inline TriangleMesh load_ply(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply")
        throw ParseError("missing ply magic");

    long nv = -1, nf = -1;
    int vertex_props = 0, x_idx = -1, y_idx = -1, z_idx = -1;
    bool in_vertex_element = false, warned = false;
    std::vector<std::string> elements; // order of elements in the body
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii")
                throw ParseError("binary PLY not supported; convert to ascii");
        } else if (kw == "element") {
            std::string name;
            long count;
            ls >> name >> count;
            elements.push_back(name);
            in_vertex_element = (name == "vertex");
            if (name == "vertex") nv = count;
            else if (name == "face") nf = count;
            else throw ParseError("unsupported PLY element '" + name + "'");
        } else if (kw == "property") {
            if (in_vertex_element) {
                std::string type, name;
                ls >> type >> name;
                if (name == "x") x_idx = vertex_props;
                else if (name == "y") y_idx = vertex_props;
                else if (name == "z") z_idx = vertex_props;
                else if (!warned) {
                    std::cerr << "warning: ignoring PLY vertex property '" << name << "'\n";
                    warned = true;
                }
                ++vertex_props;
            }
        } else if (kw == "end_header") {
            break;
        } else if (kw != "comment") {
            throw ParseError("unsupported PLY header keyword '" + kw + "'");
        }
    }
    if (nv <= 0 || nf < 0 || x_idx < 0 || y_idx < 0 || z_idx < 0)
        throw ParseError("incomplete PLY header");

    TriangleMesh mesh;
    mesh.vertices.reserve(nv);
    for (long i = 0; i < nv; ++i) {
        std::istringstream ls(detail::next_content_line(in, "PLY vertex"));
        std::vector<std::string> toks;
        std::string t;
        while (ls >> t) toks.push_back(t);
        if (static_cast<int>(toks.size()) < vertex_props)
            throw ParseError("malformed PLY vertex " + std::to_string(i));
        mesh.vertices.emplace_back(detail::parse_double(toks[x_idx], "PLY vertex"),
                                   detail::parse_double(toks[y_idx], "PLY vertex"),
                                   detail::parse_double(toks[z_idx], "PLY vertex"));
    }
    for (long f = 0; f < nf; ++f) {
        std::istringstream ls(detail::next_content_line(in, "PLY face"));
        long cnt, a, b, c;
        if (!(ls >> cnt >> a >> b >> c) || cnt != 3)
            throw ParseError("PLY face " + std::to_string(f) + ": only triangles supported");
        mesh.faces.push_back({static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)});
    }
    return mesh;
}

inline TriangleMesh load_obj(std::istream& in) {
    TriangleMesh mesh;
    std::string line;
    long lineno = 0;
    bool warned = false;
    auto face_index = [&](std::string tok) {
        // "v", "v/vt", "v//vn", "v/vt/vn" — only the position index matters
        auto slash = tok.find('/');
        if (slash != std::string::npos) tok.erase(slash);
        long idx = detail::parse_int(tok, "OBJ face");
        if (idx < 0) idx = static_cast<long>(mesh.vertices.size()) + idx + 1;
        return static_cast<int>(idx - 1); // OBJ is 1-based
    };
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw == "v") {
            std::string xs, ys, zs;
            if (!(ls >> xs >> ys >> zs))
                throw ParseError("malformed OBJ vertex at line " + std::to_string(lineno));
            mesh.vertices.emplace_back(detail::parse_double(xs, "OBJ vertex"),
                                       detail::parse_double(ys, "OBJ vertex"),
                                       detail::parse_double(zs, "OBJ vertex"));
        } else if (kw == "f") {
            std::vector<std::string> toks;
            std::string t;
            while (ls >> t) toks.push_back(t);
            if (toks.size() != 3)
                throw ParseError("OBJ face at line " + std::to_string(lineno) +
                                 ": only triangles supported");
            mesh.faces.push_back({face_index(toks[0]), face_index(toks[1]), face_index(toks[2])});
        } else if (!warned && (kw == "vt" || kw == "vn" || kw == "usemtl" || kw == "mtllib" ||
                               kw == "o" || kw == "g" || kw == "s")) {
            std::cerr << "warning: ignoring OBJ attribute '" << kw << "'\n";
            warned = true;
        }
    }
    return mesh;
}

enum class MeshFormat { OFF, PLY, OBJ };

inline MeshFormat mesh_format_from_path(const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == "off") return MeshFormat::OFF;
    if (ext == "ply") return MeshFormat::PLY;
    if (ext == "obj") return MeshFormat::OBJ;
    throw ValidationError("unknown mesh extension '." + ext + "' (expected off/ply/obj)");
}

inline TriangleMesh load_mesh(const std::string& path) {
    MeshFormat fmt = mesh_format_from_path(path);
    std::ifstream in(path);
    if (!in) throw IOError("cannot open mesh file '" + path + "'");
    TriangleMesh mesh;
    switch (fmt) {
        case MeshFormat::OFF: mesh = load_off(in); break;
        case MeshFormat::PLY: mesh = load_ply(in); break;
        case MeshFormat::OBJ: mesh = load_obj(in); break;
    }
    validate_mesh(mesh);
    return mesh;
}

inline void save_mesh(std::ostream& out, const TriangleMesh& mesh, MeshFormat fmt) {
    switch (fmt) {
        case MeshFormat::OFF:
            out << "OFF\n" << mesh.n() << ' ' << mesh.face_count() << " 0\n";
            for (const auto& v : mesh.vertices)
                out << format_g17(v.x()) << ' ' << format_g17(v.y()) << ' ' << format_g17(v.z())
                    << '\n';
            for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
            break;
        case MeshFormat::PLY:
            out << "ply\nformat ascii 1.0\nelement vertex " << mesh.n()
                << "\nproperty double x\nproperty double y\nproperty double z\nelement face "
                << mesh.face_count() << "\nproperty list uchar int vertex_indices\nend_header\n";
            for (const auto& v : mesh.vertices)
                out << format_g17(v.x()) << ' ' << format_g17(v.y()) << ' ' << format_g17(v.z())
                    << '\n';
            for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
            break;
        case MeshFormat::OBJ:
            for (const auto& v : mesh.vertices)
                out << "v " << format_g17(v.x()) << ' ' << format_g17(v.y()) << ' '
                    << format_g17(v.z()) << '\n';
            for (const auto& f : mesh.faces)
                out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
            break;
    }
}

inline void save_mesh(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw IOError("cannot write mesh file '" + path + "'");
    save_mesh(out, mesh, mesh_format_from_path(path));
}

// Ground-truth / recovered correspondence files: one 0-based target vertex
// index per line, line i = image of source vertex i.
inline std::vector<int> load_assignment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot open assignment file '" + path + "'");
    std::vector<int> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        out.push_back(static_cast<int>(detail::parse_int(
            line.substr(line.find_first_not_of(" \t\r\n"),
                        line.find_last_not_of(" \t\r\n") -
                            line.find_first_not_of(" \t\r\n") + 1),
            "assignment file")));
    }
    if (out.empty()) throw ParseError("empty assignment file '" + path + "'");
    return out;
}

inline void save_assignment(const std::string& path, const std::vector<int>& assignment) {
    std::ofstream out(path);
    if (!out) throw IOError("cannot write assignment file '" + path + "'");
    for (int v : assignment) out << v << '\n';
}

} // namespace fmr
