#include "mvrec/io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mvrec {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const fs::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

void push_u32le(std::string& out, std::uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

void push_u16le(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void push_f32le(std::string& out, float v) {
  push_u32le(out, std::bit_cast<std::uint32_t>(v));
}

void push_i32le(std::string& out, std::int32_t v) {
  push_u32le(out, std::bit_cast<std::uint32_t>(v));
}

// Byte-cursor over a loaded file; every read checks bounds so truncation
// surfaces as an error naming the file rather than as garbage data.
struct Cursor {
  const fs::path& path;
  const std::string& data;
  std::size_t pos = 0;

  void require(std::size_t n) const {
    if (pos + n > data.size()) fail(path, "truncated file");
  }
  std::uint8_t u8() {
    require(1);
    return std::uint8_t(data[pos++]);
  }
  std::uint16_t u16le() {
    require(2);
    const auto* p = reinterpret_cast<const std::uint8_t*>(data.data() + pos);
    pos += 2;
    return std::uint16_t(p[0] | (p[1] << 8));
  }
  std::uint32_t u32le() {
    require(4);
    const auto* p = reinterpret_cast<const std::uint8_t*>(data.data() + pos);
    pos += 4;
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
           (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  }
  float f32le() { return std::bit_cast<float>(u32le()); }
  std::int32_t i32le() { return std::bit_cast<std::int32_t>(u32le()); }
  std::string bytes(std::size_t n) {
    require(n);
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
  }
  bool expect(const char* tag) {
    const std::size_t n = std::strlen(tag);
    if (pos + n > data.size() || data.compare(pos, n, tag) != 0) return false;
    pos += n;
    return true;
  }
};

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(tmp, "cannot open for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) fail(tmp, "write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(path, "rename failed: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) fail(path, "read failed");
  return std::move(buf).str();
}

// PGM header tokens, separated by whitespace and '#' comments.
int pgm_int(Cursor& c) {
  for (;;) {
    c.require(1);
    const char ch = c.data[c.pos];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++c.pos;
    } else if (ch == '#') {
      while (c.pos < c.data.size() && c.data[c.pos] != '\n') ++c.pos;
    } else {
      break;
    }
  }
  int value = 0;
  bool any = false;
  while (c.pos < c.data.size() &&
         std::isdigit(static_cast<unsigned char>(c.data[c.pos]))) {
    value = value * 10 + (c.data[c.pos] - '0');
    ++c.pos;
    any = true;
  }
  if (!any) fail(c.path, "malformed PGM header");
  return value;
}

struct PgmHeader {
  int width, height, maxval;
};

PgmHeader read_pgm_header(Cursor& c) {
  if (!c.expect("P5")) fail(c.path, "not a binary PGM (missing P5 magic)");
  PgmHeader h;
  h.width = pgm_int(c);
  h.height = pgm_int(c);
  h.maxval = pgm_int(c);
  c.require(1);
  if (!std::isspace(static_cast<unsigned char>(c.data[c.pos]))) {
    fail(c.path, "malformed PGM header");
  }
  ++c.pos;
  if (h.width <= 0 || h.height <= 0) fail(c.path, "bad PGM dimensions");
  return h;
}

}  // namespace

void write_vxg(const fs::path& path, const VoxelGrid& grid) {
  grid.validate();
  std::string out;
  out.reserve(16 + grid.values.size() * 4);
  out += "VXG1";
  push_u32le(out, std::uint32_t(grid.res));
  push_u32le(out, std::uint32_t(grid.res));
  push_u32le(out, std::uint32_t(grid.res));
  push_f32le(out, float(grid.extent));
  for (float v : grid.values) push_f32le(out, v);
  write_file_atomic(path, out);
}

VoxelGrid read_vxg(const fs::path& path) {
  const std::string data = read_file(path);
  Cursor c{path, data};
  if (!c.expect("VXG1")) fail(path, "bad magic (expected VXG1)");
  const std::uint32_t dx = c.u32le();
  const std::uint32_t dy = c.u32le();
  const std::uint32_t dz = c.u32le();
  if (dx != dy || dy != dz) fail(path, "non-cubic grid dims");
  if (dx == 0 || dx > 4096) fail(path, "unreasonable grid resolution");
  VoxelGrid grid;
  grid.res = int(dx);
  grid.extent = c.f32le();
  if (!(grid.extent > 0)) fail(path, "non-positive extent");
  const std::size_t n = std::size_t(grid.res) * grid.res * grid.res;
  c.require(n * 4);
  grid.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) grid.values[i] = c.f32le();
  if (c.pos != data.size()) fail(path, "trailing bytes after grid data");
  return grid;
}

void write_pgm(const fs::path& path, const ImageU8& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()),
             img.pixels.size());
  write_file_atomic(path, out);
}

void write_pgm(const fs::path& path, const ImageU16& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n65535\n";
  out.reserve(out.size() + img.pixels.size() * 2);
  for (std::uint16_t v : img.pixels) push_u16le(out, v);
  write_file_atomic(path, out);
}

ImageU8 read_pgm8(const fs::path& path) {
  const std::string data = read_file(path);
  Cursor c{path, data};
  const PgmHeader h = read_pgm_header(c);
  if (h.maxval != 255) fail(path, "expected 8-bit PGM (maxval 255)");
  ImageU8 img{h.width, h.height, {}};
  const std::size_t n = std::size_t(h.width) * h.height;
  c.require(n);
  img.pixels.resize(n);
  std::memcpy(img.pixels.data(), data.data() + c.pos, n);
  return img;
}

ImageU16 read_pgm16(const fs::path& path) {
  const std::string data = read_file(path);
  Cursor c{path, data};
  const PgmHeader h = read_pgm_header(c);
  if (h.maxval != 65535) fail(path, "expected 16-bit PGM (maxval 65535)");
  ImageU16 img{h.width, h.height, {}};
  const std::size_t n = std::size_t(h.width) * h.height;
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) img.pixels[i] = c.u16le();
  return img;
}

void write_obj(const fs::path& path, const TriangleMesh& mesh) {
  mesh.validate();
  std::ostringstream out;
  out.precision(9);
  for (const Vec3& v : mesh.vertices) {
    out << "v " << v.x << " " << v.y << " " << v.z << "\n";
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  }
  write_file_atomic(path, std::move(out).str());
}

TriangleMesh read_obj(const fs::path& path) {
  std::istringstream in(read_file(path));
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x >> v.y >> v.z)) {
        fail(path, "bad vertex at line " + std::to_string(line_no));
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<std::int32_t, 3> tri;
      for (int k = 0; k < 3; ++k) {
        std::string field;
        if (!(ls >> field)) {
          fail(path, "bad face at line " + std::to_string(line_no));
        }
        // Tolerate v/vt/vn fields by taking the leading vertex index.
        tri[k] = std::int32_t(std::stol(field)) - 1;
      }
      mesh.triangles.push_back(tri);
    }
  }
  mesh.validate();
  return mesh;
}

void write_ply(const fs::path& path, const TriangleMesh& mesh,
               const std::vector<float>& quality) {
  mesh.validate();
  if (!quality.empty() && quality.size() != mesh.vertices.size()) {
    fail(path, "quality channel size does not match vertex count");
  }
  std::string out;
  out += "ply\nformat binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  if (!quality.empty()) out += "property float quality\n";
  out += "element face " + std::to_string(mesh.triangles.size()) + "\n";
  out += "property list uchar int vertex_indices\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    push_f32le(out, float(mesh.vertices[i].x));
    push_f32le(out, float(mesh.vertices[i].y));
    push_f32le(out, float(mesh.vertices[i].z));
    if (!quality.empty()) push_f32le(out, quality[i]);
  }
  for (const auto& t : mesh.triangles) {
    out.push_back(char(3));
    push_i32le(out, t[0]);
    push_i32le(out, t[1]);
    push_i32le(out, t[2]);
  }
  write_file_atomic(path, out);
}

PlyData read_ply(const fs::path& path) {
  const std::string data = read_file(path);
  Cursor c{path, data};

  std::size_t header_end = data.find("end_header\n");
  if (data.compare(0, 4, "ply\n") != 0 || header_end == std::string::npos) {
    fail(path, "not a PLY file");
  }
  header_end += std::strlen("end_header\n");

  std::istringstream head(data.substr(0, header_end));
  std::string line;
  std::size_t n_vertices = 0, n_faces = 0;
  bool has_quality = false;
  bool in_vertex = false;
  int vertex_props = 0;
  while (std::getline(head, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") fail(path, "unsupported PLY format " + fmt);
    } else if (tag == "element") {
      std::string name;
      std::size_t count;
      ls >> name >> count;
      in_vertex = (name == "vertex");
      if (name == "vertex") n_vertices = count;
      if (name == "face") n_faces = count;
    } else if (tag == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (type != "float") fail(path, "unsupported vertex property type " + type);
      ++vertex_props;
      if (name == "quality") has_quality = true;
    }
  }
  if (vertex_props != 3 && vertex_props != 4) {
    fail(path, "expected x/y/z(/quality) float vertex layout");
  }

  c.pos = header_end;
  PlyData out;
  out.mesh.vertices.resize(n_vertices);
  if (has_quality) out.quality.resize(n_vertices);
  for (std::size_t i = 0; i < n_vertices; ++i) {
    out.mesh.vertices[i].x = c.f32le();
    out.mesh.vertices[i].y = c.f32le();
    out.mesh.vertices[i].z = c.f32le();
    float extra = 0;
    if (vertex_props == 4) extra = c.f32le();
    if (has_quality) out.quality[i] = extra;
  }
  out.mesh.triangles.resize(n_faces);
  for (std::size_t i = 0; i < n_faces; ++i) {
    if (c.u8() != 3) fail(path, "non-triangle face");
    for (int k = 0; k < 3; ++k) out.mesh.triangles[i][k] = c.i32le();
  }
  out.mesh.validate();
  return out;
}

void write_prm(const fs::path& path, const std::string& descriptor,
               const std::vector<float>& params) {
  std::string out;
  out.reserve(12 + descriptor.size() + params.size() * 4);
  out += "PRM1";
  push_u32le(out, std::uint32_t(descriptor.size()));
  out += descriptor;
  push_u32le(out, std::uint32_t(params.size()));
  for (float p : params) push_f32le(out, p);
  write_file_atomic(path, out);
}

PrmData read_prm(const fs::path& path) {
  const std::string data = read_file(path);
  Cursor c{path, data};
  if (!c.expect("PRM1")) fail(path, "bad magic (expected PRM1)");
  const std::uint32_t desc_len = c.u32le();
  PrmData out;
  out.descriptor = c.bytes(desc_len);
  const std::uint32_t n = c.u32le();
  c.require(std::size_t(n) * 4);
  out.params.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) out.params[i] = c.f32le();
  if (c.pos != data.size()) fail(path, "trailing bytes after parameters");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, text);
}

std::string read_text(const fs::path& path) { return read_file(path); }

}  // namespace mvrec
