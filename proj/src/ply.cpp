#include "jsenet/ply.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "jsenet/binary_io.hpp"

namespace jsenet {

namespace {

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

ScalarType parse_type(const std::string& name) {
  if (name == "char" || name == "int8") return ScalarType::kInt8;
  if (name == "uchar" || name == "uint8") return ScalarType::kUInt8;
  if (name == "short" || name == "int16") return ScalarType::kInt16;
  if (name == "ushort" || name == "uint16") return ScalarType::kUInt16;
  if (name == "int" || name == "int32") return ScalarType::kInt32;
  if (name == "uint" || name == "uint32") return ScalarType::kUInt32;
  if (name == "float" || name == "float32") return ScalarType::kFloat32;
  if (name == "double" || name == "float64") return ScalarType::kFloat64;
  throw InputError("ply: unknown property type '" + name + "'");
}

double read_binary(std::istream& in, ScalarType type) {
  using binary::read_le;
  switch (type) {
    case ScalarType::kInt8: return read_le<std::int8_t>(in, "ply value");
    case ScalarType::kUInt8: return read_le<std::uint8_t>(in, "ply value");
    case ScalarType::kInt16: return read_le<std::int16_t>(in, "ply value");
    case ScalarType::kUInt16: return read_le<std::uint16_t>(in, "ply value");
    case ScalarType::kInt32: return read_le<std::int32_t>(in, "ply value");
    case ScalarType::kUInt32: return read_le<std::uint32_t>(in, "ply value");
    case ScalarType::kFloat32: return read_le<float>(in, "ply value");
    case ScalarType::kFloat64: return read_le<double>(in, "ply value");
  }
  return 0;
}

struct PropertyDecl {
  std::string name;
  ScalarType type = ScalarType::kFloat32;
  bool is_list = false;
  ScalarType count_type = ScalarType::kUInt8;
};

struct ElementDecl {
  std::string name;
  std::size_t count = 0;
  std::vector<PropertyDecl> properties;
};

struct Header {
  PlyFormat format = PlyFormat::kAscii;
  std::vector<ElementDecl> elements;
};

Header parse_header(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw InputError("ply: missing 'ply' magic line");
  Header header;
  bool have_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream words(line);
    std::string keyword;
    words >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "end_header") {
      if (!have_format) throw InputError("ply: missing format line");
      return header;
    }
    if (keyword == "format") {
      std::string fmt;
      words >> fmt;
      if (fmt == "ascii") header.format = PlyFormat::kAscii;
      else if (fmt == "binary_little_endian") header.format = PlyFormat::kBinaryLittleEndian;
      else throw InputError("ply: unsupported format '" + fmt + "'");
      have_format = true;
    } else if (keyword == "element") {
      ElementDecl e;
      if (!(words >> e.name >> e.count)) throw InputError("ply: malformed element line: " + line);
      header.elements.push_back(std::move(e));
    } else if (keyword == "property") {
      if (header.elements.empty()) throw InputError("ply: property before any element");
      PropertyDecl p;
      std::string type;
      words >> type;
      if (type == "list") {
        std::string count_type, item_type;
        words >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_type(count_type);
        p.type = parse_type(item_type);
      } else {
        p.type = parse_type(type);
        words >> p.name;
      }
      if (p.name.empty()) throw InputError("ply: malformed property line: " + line);
      header.elements.back().properties.push_back(std::move(p));
    } else {
      throw InputError("ply: unexpected header line: " + line);
    }
  }
  throw InputError("ply: header not terminated by end_header");
}

class ValueReader {
 public:
  ValueReader(std::istream& in, PlyFormat format) : in_(in), format_(format) {}

  double next(ScalarType type) {
    if (format_ == PlyFormat::kBinaryLittleEndian) return read_binary(in_, type);
    std::string token;
    if (!(in_ >> token)) throw InputError("ply: unexpected end of ascii data");
    try {
      return std::stod(token);
    } catch (const std::exception&) {
      throw InputError("ply: bad ascii value '" + token + "'");
    }
  }

 private:
  std::istream& in_;
  PlyFormat format_;
};

}  // namespace

const std::vector<double>* PlyData::find(const std::string& name) const {
  for (const auto& p : vertex_properties)
    if (p.name == name) return &p.values;
  return nullptr;
}

PlyData read_ply_data(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open ply file: " + path.string());
  const Header header = parse_header(in);
  ValueReader reader(in, header.format);
  PlyData data;
  for (const ElementDecl& element : header.elements) {
    const bool is_vertex = element.name == "vertex";
    const bool is_face = element.name == "face";
    if (is_vertex) {
      data.vertex_count = element.count;
      for (const auto& p : element.properties) {
        if (!p.is_list) data.vertex_properties.push_back({p.name, std::vector<double>(element.count)});
      }
    }
    for (std::size_t row = 0; row < element.count; ++row) {
      std::size_t scalar_slot = 0;
      for (const PropertyDecl& p : element.properties) {
        if (!p.is_list) {
          const double v = reader.next(p.type);
          if (is_vertex) data.vertex_properties[scalar_slot++].values[row] = v;
          continue;
        }
        const double count_value = reader.next(p.count_type);
        if (count_value < 0 || count_value > 1e6) throw InputError("ply: bad list length");
        const auto count = static_cast<std::size_t>(count_value);
        std::vector<std::uint32_t> items(count);
        for (auto& item : items) {
          const double v = reader.next(p.type);
          if (v < 0) throw InputError("ply: negative index in list property " + p.name);
          item = static_cast<std::uint32_t>(v);
        }
        if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) {
          if (count < 3) throw InputError("ply: face with fewer than 3 vertices");
          for (std::size_t k = 1; k + 1 < count; ++k) data.faces.push_back({items[0], items[k], items[k + 1]});
        }
      }
    }
  }
  if (data.vertex_count == 0 && header.elements.empty()) throw InputError("ply: no elements");
  return data;
}

PointCloud read_ply_cloud(const std::filesystem::path& path) {
  const PlyData data = read_ply_data(path);
  const auto* x = data.find("x");
  const auto* y = data.find("y");
  const auto* z = data.find("z");
  if (!x || !y || !z) throw InputError("ply: vertex element lacks x/y/z: " + path.string());
  const auto* r = data.find("red");
  const auto* g = data.find("green");
  const auto* b = data.find("blue");
  const auto* label = data.find("label");
  PointCloud cloud;
  cloud.resize(data.vertex_count);
  for (std::size_t i = 0; i < data.vertex_count; ++i) {
    cloud.positions[i] = Vec3((*x)[i], (*y)[i], (*z)[i]);
    if (!cloud.positions[i].allFinite()) throw InputError("ply: non-finite position in " + path.string());
    if (r && g && b) cloud.colors[i] = Color(float((*r)[i] / 255.0), float((*g)[i] / 255.0), float((*b)[i] / 255.0));
    if (label) cloud.labels[i] = static_cast<std::int32_t>((*label)[i]);
  }
  return cloud;
}

TriangleMesh read_ply_mesh(const std::filesystem::path& path) {
  const PointCloud vertices = read_ply_cloud(path);
  const PlyData data = read_ply_data(path);
  TriangleMesh mesh;
  mesh.vertices = vertices.positions;
  mesh.colors = vertices.colors;
  mesh.labels = vertices.labels;
  mesh.faces = data.faces;
  for (const auto& f : mesh.faces)
    for (std::uint32_t i : f)
      if (i >= mesh.vertices.size()) throw InputError("ply: face index out of range in " + path.string());
  return mesh;
}

namespace {

std::uint8_t to_byte(float c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0f, 1.0f) * 255.0f));
}

void write_vertex_header(std::ostream& out, PlyFormat format, std::size_t count,
                         const std::vector<ExtraProperty>& extra) {
  out << "ply\nformat " << (format == PlyFormat::kAscii ? "ascii" : "binary_little_endian")
      << " 1.0\nelement vertex " << count
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nproperty int label\n";
  for (const auto& e : extra) out << "property float " << e.name << '\n';
}

void write_vertex(std::ostream& out, PlyFormat format, const Vec3& p, const Color& c, std::int32_t label,
                  const std::vector<ExtraProperty>& extra, std::size_t row) {
  if (format == PlyFormat::kAscii) {
    out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' ' << static_cast<float>(p.z())
        << ' ' << int(to_byte(c.x())) << ' ' << int(to_byte(c.y())) << ' ' << int(to_byte(c.z())) << ' '
        << label;
    for (const auto& e : extra) out << ' ' << e.values[row];
    out << '\n';
    return;
  }
  using binary::write_le;
  write_le<float>(out, static_cast<float>(p.x()));
  write_le<float>(out, static_cast<float>(p.y()));
  write_le<float>(out, static_cast<float>(p.z()));
  write_le<std::uint8_t>(out, to_byte(c.x()));
  write_le<std::uint8_t>(out, to_byte(c.y()));
  write_le<std::uint8_t>(out, to_byte(c.z()));
  write_le<std::int32_t>(out, label);
  for (const auto& e : extra) write_le<float>(out, e.values[row]);
}

}  // namespace

void write_ply_cloud(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format,
                     const std::vector<ExtraProperty>& extra) {
  cloud.validate();
  for (const auto& e : extra) require(e.values.size() == cloud.size(), "ply: extra property " + e.name + " has wrong length");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open ply file for writing: " + path.string());
  out.precision(9);
  write_vertex_header(out, format, cloud.size(), extra);
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i)
    write_vertex(out, format, cloud.positions[i], cloud.colors[i], cloud.labels[i], extra, i);
  if (!out) throw InputError("failed writing " + path.string());
}

void write_ply_mesh(const std::filesystem::path& path, const TriangleMesh& mesh, PlyFormat format) {
  mesh.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open ply file for writing: " + path.string());
  out.precision(9);
  write_vertex_header(out, format, mesh.vertices.size(), {});
  out << "element face " << mesh.faces.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    write_vertex(out, format, mesh.vertices[i], mesh.colors.empty() ? Color::Zero() : mesh.colors[i],
                 mesh.labels.empty() ? kIgnoreLabel : mesh.labels[i], {}, i);
  }
  for (const auto& f : mesh.faces) {
    if (format == PlyFormat::kAscii) {
      out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    } else {
      binary::write_le<std::uint8_t>(out, 3);
      for (std::uint32_t i : f) binary::write_le<std::int32_t>(out, static_cast<std::int32_t>(i));
    }
  }
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace jsenet
