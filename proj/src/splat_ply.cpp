#include "splatsim/splat_ply.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include "splatsim/error.hpp"
#include "splatsim/log.hpp"

namespace splatsim {

namespace {

std::size_t scalar_size(const std::string& type) {
    static const std::map<std::string, std::size_t> sizes = {
        {"char", 1}, {"int8", 1}, {"uchar", 1}, {"uint8", 1},
        {"short", 2}, {"int16", 2}, {"ushort", 2}, {"uint16", 2},
        {"int", 4}, {"int32", 4}, {"uint", 4}, {"uint32", 4},
        {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8},
    };
    auto it = sizes.find(type);
    if (it == sizes.end()) throw ParseError("unknown PLY property type '" + type + "'");
    return it->second;
}

bool is_float32(const std::string& type) { return type == "float" || type == "float32"; }

struct PlyProperty {
    std::string name;
    std::string type;
    std::size_t offset = 0; // byte offset within a binary row
    std::size_t column = 0; // token index within an ascii row
};

struct PlyHeader {
    bool binary = false;
    std::size_t vertex_count = 0;
    std::vector<PlyProperty> properties;
    std::size_t row_stride = 0;

    const PlyProperty* find(const std::string& name) const {
        for (const auto& p : properties)
            if (p.name == name) return &p;
        return nullptr;
    }
};

PlyHeader parse_header(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line) || (line != "ply" && line != "ply\r"))
        throw ParseError(path + ": not a PLY file (missing 'ply' magic)");

    PlyHeader header;
    bool format_seen = false;
    bool in_vertex_element = false;
    std::size_t offset = 0;
    std::size_t column = 0;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment" || word == "obj_info" || word.empty()) continue;
        if (word == "end_header") {
            if (!format_seen) throw ParseError(path + ": missing 'format' line");
            header.row_stride = offset;
            return header;
        }
        if (word == "format") {
            std::string fmt, version;
            ls >> fmt >> version;
            if (fmt == "binary_little_endian")
                header.binary = true;
            else if (fmt == "ascii")
                header.binary = false;
            else
                throw ParseError(path + ": unsupported PLY format '" + fmt + "'");
            format_seen = true;
        } else if (word == "element") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            if (name == "vertex") {
                header.vertex_count = count;
                in_vertex_element = true;
            } else {
                if (count > 0)
                    throw ParseError(path + ": unsupported non-empty element '" + name + "'");
                in_vertex_element = false;
            }
        } else if (word == "property") {
            std::string type;
            ls >> type;
            if (type == "list")
                throw ParseError(path + ": list properties are not supported");
            std::string name;
            ls >> name;
            if (!in_vertex_element) continue;
            PlyProperty prop;
            prop.name = name;
            prop.type = type;
            prop.offset = offset;
            prop.column = column;
            offset += scalar_size(type);
            ++column;
            header.properties.push_back(prop);
        } else {
            throw ParseError(path + ": unexpected header line '" + line + "'");
        }
    }
    throw ParseError(path + ": truncated header (no end_header)");
}

double read_scalar_le(const unsigned char* p, const std::string& type) {
    if (is_float32(type)) {
        float f;
        std::memcpy(&f, p, 4);
        return static_cast<double>(f);
    }
    if (type == "double" || type == "float64") {
        double d;
        std::memcpy(&d, p, 8);
        return d;
    }
    if (type == "uchar" || type == "uint8") return static_cast<double>(*p);
    if (type == "char" || type == "int8") return static_cast<double>(*reinterpret_cast<const signed char*>(p));
    if (type == "ushort" || type == "uint16") {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    if (type == "short" || type == "int16") {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    if (type == "uint" || type == "uint32") {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    std::int32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double y) { return std::log(y / (1.0 - y)); }

// Degree from the f_rest count: 3 * ((L+1)^2 - 1) values for L in [0, 3].
int degree_from_rest_count(std::size_t rest_count, const std::string& path) {
    if (rest_count % 3 != 0)
        throw ParseError(path + ": f_rest count not divisible by 3");
    const std::size_t per_channel = rest_count / 3;
    for (int degree = 0; degree <= 3; ++degree) {
        if (per_channel == static_cast<std::size_t>(sh_coeff_count(degree) - 1)) return degree;
    }
    throw ParseError(path + ": f_rest count does not match any SH degree <= 3");
}

} // namespace

GaussianCloud load_gaussian_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    const PlyHeader header = parse_header(in, path);

    static const char* base_fields[] = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2",
                                        "opacity", "scale_0", "scale_1", "scale_2",
                                        "rot_0", "rot_1", "rot_2", "rot_3"};
    for (const char* name : base_fields) {
        const PlyProperty* p = header.find(name);
        if (!p) throw ParseError(path + ": missing required property '" + std::string(name) + "'");
        if (!is_float32(p->type))
            throw ParseError(path + ": property '" + std::string(name) + "' must be float32");
    }

    // Count contiguous f_rest_0..k.
    std::size_t rest_count = 0;
    while (header.find("f_rest_" + std::to_string(rest_count)) != nullptr) ++rest_count;
    const int degree = degree_from_rest_count(rest_count, path);
    const std::size_t per_channel = rest_count / 3;

    std::set<std::string> known = {"nx", "ny", "nz"};
    for (const char* name : base_fields) known.insert(name);
    for (std::size_t i = 0; i < rest_count; ++i) known.insert("f_rest_" + std::to_string(i));
    for (const auto& p : header.properties) {
        if (!known.count(p.name)) warn(path + ": ignoring PLY property '" + p.name + "'");
    }

    // Column/offset lookup in a fixed evaluation order.
    std::vector<const PlyProperty*> lookup;
    for (const char* name : base_fields) lookup.push_back(header.find(name));
    for (std::size_t i = 0; i < rest_count; ++i)
        lookup.push_back(header.find("f_rest_" + std::to_string(i)));

    GaussianCloud cloud;
    cloud.sh_degree = degree;
    cloud.kernels.resize(header.vertex_count);

    std::vector<double> row(lookup.size());
    std::vector<unsigned char> raw(header.row_stride);
    std::vector<double> ascii_tokens(header.properties.size());

    for (std::size_t i = 0; i < header.vertex_count; ++i) {
        if (header.binary) {
            in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
            if (!in) throw ParseError(path + ": truncated vertex data at element " + std::to_string(i));
            for (std::size_t f = 0; f < lookup.size(); ++f)
                row[f] = read_scalar_le(raw.data() + lookup[f]->offset, lookup[f]->type);
        } else {
            std::string line;
            do {
                if (!std::getline(in, line))
                    throw ParseError(path + ": truncated vertex data at element " + std::to_string(i));
            } while (line.find_first_not_of(" \t\r") == std::string::npos);
            // strtod handles nan/inf tokens, which stream extraction rejects
            const char* cursor = line.c_str();
            for (std::size_t c = 0; c < header.properties.size(); ++c) {
                char* end = nullptr;
                ascii_tokens[c] = std::strtod(cursor, &end);
                if (end == cursor)
                    throw ParseError(path + ": short ascii row at element " + std::to_string(i));
                cursor = end;
            }
            for (std::size_t f = 0; f < lookup.size(); ++f) row[f] = ascii_tokens[lookup[f]->column];
        }

        for (double v : row) {
            if (!std::isfinite(v))
                throw DataError(path + ": non-finite value at element " + std::to_string(i));
        }

        GaussianKernel& k = cloud.kernels[i];
        k.center = Vec3(row[0], row[1], row[2]);
        k.opacity = sigmoid(row[6]);
        k.scale = Vec3(std::exp(row[7]), std::exp(row[8]), std::exp(row[9]));
        Quat q(row[10], row[11], row[12], row[13]); // (w, x, y, z)
        const double norm = q.norm();
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw DataError(path + ": degenerate quaternion at element " + std::to_string(i));
        // Quaternions already unit within the 1e-6 invariant are left
        // untouched so their stored bits round-trip exactly.
        k.rotation = std::abs(norm - 1.0) > 1e-6 ? Quat(q.coeffs() / norm) : q;
        k.sh.resize(sh_coeff_count(degree));
        k.sh[0] = Vec3(row[3], row[4], row[5]);
        for (std::size_t j = 1; j < k.sh.size(); ++j) {
            for (int ch = 0; ch < 3; ++ch)
                k.sh[j][ch] = row[14 + static_cast<std::size_t>(ch) * per_channel + (j - 1)];
        }
        if (!k.center.allFinite() || !k.scale.allFinite())
            throw DataError(path + ": non-finite value at element " + std::to_string(i));
    }
    return cloud;
}

void save_gaussian_ply(const GaussianCloud& cloud, const std::string& path, PlyFormat format) {
    validate_cloud(cloud);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    const std::size_t per_channel = static_cast<std::size_t>(sh_coeff_count(cloud.sh_degree) - 1);
    const std::size_t rest_count = 3 * per_channel;

    out << "ply\n";
    out << (format == PlyFormat::BinaryLittleEndian ? "format binary_little_endian 1.0\n"
                                                    : "format ascii 1.0\n");
    out << "element vertex " << cloud.size() << "\n";
    const char* coords[] = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    for (const char* c : coords) out << "property float " << c << "\n";
    for (std::size_t i = 0; i < rest_count; ++i) out << "property float f_rest_" << i << "\n";
    out << "property float opacity\n";
    for (int i = 0; i < 3; ++i) out << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) out << "property float rot_" << i << "\n";
    out << "end_header\n";

    std::vector<float> row(9 + rest_count + 1 + 3 + 4);
    for (const auto& k : cloud.kernels) {
        std::size_t f = 0;
        for (int a = 0; a < 3; ++a) row[f++] = static_cast<float>(k.center[a]);
        for (int a = 0; a < 3; ++a) row[f++] = 0.0f; // normals, unused by the engine
        for (int a = 0; a < 3; ++a) row[f++] = static_cast<float>(k.sh[0][a]);
        for (int ch = 0; ch < 3; ++ch)
            for (std::size_t j = 1; j <= per_channel; ++j)
                row[f++] = static_cast<float>(k.sh[j][ch]);
        const double opacity = std::clamp(k.opacity, 1e-6, 1.0 - 1e-6);
        row[f++] = static_cast<float>(logit(opacity));
        for (int a = 0; a < 3; ++a) row[f++] = static_cast<float>(std::log(k.scale[a]));
        row[f++] = static_cast<float>(k.rotation.w());
        row[f++] = static_cast<float>(k.rotation.x());
        row[f++] = static_cast<float>(k.rotation.y());
        row[f++] = static_cast<float>(k.rotation.z());

        if (format == PlyFormat::BinaryLittleEndian) {
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
        } else {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out << ' ';
                // Shortest representation that reparses to the same float.
                std::ostringstream ss;
                ss.precision(9);
                ss << row[i];
                out << ss.str();
            }
            out << "\n";
        }
    }
    if (!out) throw IoError("write failure on '" + path + "'");
}

} // namespace splatsim
