// PLY reader/writer for point clouds. Supported: ascii and
// binary_little_endian, vertex properties x, y, z and optional nx, ny, nz as
// float32. Unknown scalar vertex properties are skipped; list properties in
// the vertex element are rejected. Elements after the vertex data are
// ignored. Writing always emits float32.
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dmicp/core.hpp"
#include "dmicp/point_cloud.hpp"

namespace dmicp {

namespace detail {

inline std::size_t ply_scalar_size(const std::string& type) {
  static const std::map<std::string, std::size_t> sizes = {
      {"char", 1},  {"int8", 1},    {"uchar", 1},  {"uint8", 1},
      {"short", 2}, {"int16", 2},   {"ushort", 2}, {"uint16", 2},
      {"int", 4},   {"int32", 4},   {"uint", 4},   {"uint32", 4},
      {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8}};
  auto it = sizes.find(type);
  return it == sizes.end() ? 0 : it->second;
}

}  // namespace detail

inline PointCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("load_ply: cannot open " + path.string());

  struct Property {
    std::string name;
    std::string type;
  };
  std::vector<Property> vertex_props;
  std::size_t vertex_count = 0;
  bool binary = false;
  bool saw_ply = false, saw_format = false, saw_vertex = false, in_vertex = false;
  bool later_element = false;
  int line_no = 0;

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    auto fail = [&](const std::string& what) {
      throw ParseError("load_ply: line " + std::to_string(line_no) + ": " + what);
    };
    if (line_no == 1) {
      if (tok != "ply") fail("missing 'ply' magic");
      saw_ply = true;
      continue;
    }
    if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        fail("unsupported format '" + fmt + "'");
      }
      saw_format = true;
      continue;
    }
    if (tok == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        if (saw_vertex) fail("duplicate vertex element");
        saw_vertex = true;
        in_vertex = true;
        vertex_count = count;
      } else {
        in_vertex = false;
        if (!saw_vertex) fail("element '" + name + "' precedes vertex element");
        later_element = true;
      }
      continue;
    }
    if (tok == "property") {
      if (!in_vertex) continue;  // properties of trailing elements are ignored
      std::string type;
      ls >> type;
      if (type == "list") fail("list property in vertex element is unsupported");
      std::string name;
      ls >> name;
      if (detail::ply_scalar_size(type) == 0) {
        fail("unknown property type '" + type + "'");
      }
      vertex_props.push_back({name, type});
      continue;
    }
    if (tok == "end_header") break;
    fail("unrecognized header line '" + tok + "'");
  }
  if (!saw_ply || !saw_format) {
    throw ParseError("load_ply: line " + std::to_string(line_no) +
                     ": truncated header");
  }
  if (!saw_vertex) throw ParseError("load_ply: no vertex element");
  (void)later_element;

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (int i = 0; i < static_cast<int>(vertex_props.size()); ++i) {
    const std::string& n = vertex_props[i].name;
    if (n == "x") ix = i;
    else if (n == "y") iy = i;
    else if (n == "z") iz = i;
    else if (n == "nx") inx = i;
    else if (n == "ny") iny = i;
    else if (n == "nz") inz = i;
  }
  if (ix < 0) throw MissingProperty("load_ply: vertex property 'x' missing");
  if (iy < 0) throw MissingProperty("load_ply: vertex property 'y' missing");
  if (iz < 0) throw MissingProperty("load_ply: vertex property 'z' missing");
  bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  cloud.points.resize(vertex_count);
  if (with_normals) cloud.normals.resize(vertex_count);

  auto read_binary_scalar = [&](const std::string& type, const char* buf) {
    if (type == "float" || type == "float32") {
      float f;
      std::memcpy(&f, buf, 4);
      return static_cast<double>(f);
    }
    if (type == "double" || type == "float64") {
      double d;
      std::memcpy(&d, buf, 8);
      return d;
    }
    return 0.0;  // non-float scalars are skipped, value unused
  };

  if (binary) {
    std::size_t stride = 0;
    std::vector<std::size_t> offsets(vertex_props.size());
    for (std::size_t i = 0; i < vertex_props.size(); ++i) {
      offsets[i] = stride;
      stride += detail::ply_scalar_size(vertex_props[i].type);
    }
    std::vector<char> row(stride);
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!in.read(row.data(), static_cast<std::streamsize>(stride))) {
        throw ParseError("load_ply: binary payload truncated at vertex " +
                         std::to_string(v));
      }
      auto val = [&](int pi) {
        return read_binary_scalar(vertex_props[pi].type, row.data() + offsets[pi]);
      };
      cloud.points[v] = Vec3(val(ix), val(iy), val(iz));
      if (with_normals) cloud.normals[v] = Vec3(val(inx), val(iny), val(inz));
    }
  } else {
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!std::getline(in, line)) {
        throw ParseError("load_ply: ascii payload truncated at vertex " +
                         std::to_string(v));
      }
      ++line_no;
      std::istringstream ls(line);
      std::vector<double> vals(vertex_props.size(), 0.0);
      for (std::size_t i = 0; i < vertex_props.size(); ++i) {
        if (!(ls >> vals[i])) {
          throw ParseError("load_ply: line " + std::to_string(line_no) +
                           ": expected " + std::to_string(vertex_props.size()) +
                           " values");
        }
      }
      cloud.points[v] = Vec3(vals[ix], vals[iy], vals[iz]);
      if (with_normals) {
        cloud.normals[v] = Vec3(vals[inx], vals[iny], vals[inz]);
      }
    }
  }
  return cloud;
}

enum class PlyFormat { BinaryLittleEndian, Ascii };

inline void save_ply(const PointCloud& cloud, const std::filesystem::path& path,
                     PlyFormat format = PlyFormat::BinaryLittleEndian) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("save_ply: cannot open " + path.string());
  bool with_normals = cloud.has_normals();
  out << "ply\n";
  out << (format == PlyFormat::Ascii ? "format ascii 1.0\n"
                                     : "format binary_little_endian 1.0\n");
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (with_normals) {
    out << "property float nx\nproperty float ny\nproperty float nz\n";
  }
  out << "end_header\n";
  if (format == PlyFormat::Ascii) {
    // 17 significant digits make the ascii parse recover exactly the
    // float32-quantized value, so ascii and binary loads agree bitwise.
    auto put = [&](double v, char sep) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g%c",
                    static_cast<double>(static_cast<float>(v)), sep);
      out << buf;
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      put(p.x(), ' ');
      put(p.y(), ' ');
      put(p.z(), with_normals ? ' ' : '\n');
      if (with_normals) {
        const Vec3& n = cloud.normals[i];
        put(n.x(), ' ');
        put(n.y(), ' ');
        put(n.z(), '\n');
      }
    }
  } else {
    std::vector<float> row(with_normals ? 6 : 3);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      row[0] = static_cast<float>(p.x());
      row[1] = static_cast<float>(p.y());
      row[2] = static_cast<float>(p.z());
      if (with_normals) {
        const Vec3& n = cloud.normals[i];
        row[3] = static_cast<float>(n.x());
        row[4] = static_cast<float>(n.y());
        row[5] = static_cast<float>(n.z());
      }
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
  }
  if (!out) throw ParseError("save_ply: write failed for " + path.string());
}

}  // namespace dmicp
