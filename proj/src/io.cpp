#include "hpppf/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "hpppf/errors.hpp"

// on-disk numbers are little-endian; the raw-byte writers below rely on it
static_assert(std::endian::native == std::endian::little);

namespace hpppf {

namespace {

constexpr char kMatrixMagic[4] = {'H', 'P', 'P', 'F'};
constexpr char kMapMagic[4] = {'H', 'P', 'S', 'M'};

std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw input_error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw input_error("cannot open " + path + " for writing");
  return out;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) {
    throw input_error("truncated header in " + path);
  }
  return v;
}

void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}

double get_f64(std::istream& in, const std::string& path) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) {
    throw input_error("truncated data in " + path);
  }
  return v;
}

std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

double parse_double(const std::string& tok, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw input_error("bad number '" + tok + "' in " + path);
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream ss(line);
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool integer_ply_type(const std::string& type) {
  return type == "char" || type == "uchar" || type == "int8" || type == "uint8" ||
         type == "short" || type == "ushort" || type == "int16" ||
         type == "uint16" || type == "int" || type == "uint" || type == "int32" ||
         type == "uint32";
}

}  // namespace

LoadedCloud read_cloud_ply(const std::string& path) {
  auto in = open_in(path, std::ios::in);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "ply") {
    throw input_error(path + ": not an ascii ply file");
  }

  long n_vertices = -1;
  bool in_vertex_element = false;
  bool seen_format = false;
  std::vector<std::pair<std::string, bool>> props;  // name, is_integer_type
  while (std::getline(in, line)) {
    line = strip_cr(line);
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "comment" || word.empty()) continue;
    if (word == "format") {
      std::string kind;
      ss >> kind;
      if (kind != "ascii") throw input_error(path + ": only ascii ply is supported");
      seen_format = true;
    } else if (word == "element") {
      std::string name;
      long count = 0;
      ss >> name >> count;
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) n_vertices = count;
    } else if (word == "property") {
      if (!in_vertex_element) continue;
      std::string type, name;
      ss >> type >> name;
      if (type == "list") throw input_error(path + ": list property on vertices");
      props.emplace_back(name, integer_ply_type(type));
    } else if (word == "end_header") {
      break;
    }
  }
  if (!seen_format || n_vertices < 0) {
    throw input_error(path + ": malformed ply header");
  }

  auto index_of = [&](const char* name) {
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (props[i].first == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  if (ix < 0 || iy < 0 || iz < 0) {
    throw input_error(path + ": vertex element lacks x/y/z");
  }
  const int ir = index_of("red"), ig = index_of("green"), ib = index_of("blue");
  const int inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
  const bool has_rgb = ir >= 0 && ig >= 0 && ib >= 0;
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

  LoadedCloud out;
  out.cloud.points.reserve(n_vertices);
  std::vector<double> row(props.size());
  for (long v = 0; v < n_vertices; ++v) {
    if (!std::getline(in, line)) throw input_error(path + ": truncated vertex data");
    std::istringstream ss(strip_cr(line));
    for (std::size_t c = 0; c < props.size(); ++c) {
      if (!(ss >> row[c])) throw input_error(path + ": short vertex row");
    }
    out.cloud.points.emplace_back(row[ix], row[iy], row[iz]);
    if (has_rgb) {
      Eigen::Vector3d rgb(row[ir], row[ig], row[ib]);
      if (props[ir].second) rgb /= 255.0;
      out.cloud.colors.push_back(rgb);
    }
    if (has_normals) out.normals.emplace_back(row[inx], row[iny], row[inz]);
  }
  out.cloud.validate();
  return out;
}

void write_cloud_ply(const std::string& path, const PointCloud& cloud,
                     const std::vector<Eigen::Vector3d>& normals) {
  cloud.validate();
  if (!normals.empty() && static_cast<int>(normals.size()) != cloud.size()) {
    throw input_error("normal count does not match the cloud");
  }
  auto out = open_out(path, std::ios::out);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_colors()) {
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  if (!normals.empty()) {
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  }
  out << "end_header\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << p.x() << " " << p.y() << " " << p.z();
    if (cloud.has_colors()) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(cloud.colors[i](c), 0.0, 1.0);
        out << " " << static_cast<int>(std::lround(v * 255.0));
      }
    }
    if (!normals.empty()) {
      out << " " << normals[i].x() << " " << normals[i].y() << " "
          << normals[i].z();
    }
    out << "\n";
  }
  if (!out) throw input_error("write failed for " + path);
}

LoadedCloud read_cloud_csv(const std::string& path) {
  auto in = open_in(path, std::ios::in);
  std::string line;
  if (!std::getline(in, line)) throw input_error(path + ": empty file");
  const auto header = split(strip_cr(line), ',');
  bool with_colors = false;
  if (header.size() == 3 && header[0] == "x" && header[1] == "y" &&
      header[2] == "z") {
    with_colors = false;
  } else if (header.size() == 6 && header[0] == "x" && header[1] == "y" &&
             header[2] == "z" && header[3] == "r" && header[4] == "g" &&
             header[5] == "b") {
    with_colors = true;
  } else {
    throw input_error(path + ": expected header x,y,z or x,y,z,r,g,b");
  }

  LoadedCloud out;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto tok = split(line, ',');
    if (tok.size() != header.size()) {
      throw input_error(path + ": row width does not match the header");
    }
    out.cloud.points.emplace_back(parse_double(tok[0], path),
                                  parse_double(tok[1], path),
                                  parse_double(tok[2], path));
    if (with_colors) {
      out.cloud.colors.emplace_back(parse_double(tok[3], path),
                                    parse_double(tok[4], path),
                                    parse_double(tok[5], path));
    }
  }
  out.cloud.validate();
  return out;
}

void write_cloud_csv(const std::string& path, const PointCloud& cloud) {
  cloud.validate();
  auto out = open_out(path, std::ios::out);
  out << (cloud.has_colors() ? "x,y,z,r,g,b" : "x,y,z") << "\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << p.x() << "," << p.y() << "," << p.z();
    if (cloud.has_colors()) {
      const auto& c = cloud.colors[i];
      out << "," << c.x() << "," << c.y() << "," << c.z();
    }
    out << "\n";
  }
  if (!out) throw input_error("write failed for " + path);
}

LoadedCloud read_cloud(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "ply") return read_cloud_ply(path);
  if (ext == "csv") return read_cloud_csv(path);
  throw input_error("unsupported cloud format: " + path);
}

DepthImage read_depth_pgm(const std::string& path, double scale) {
  auto in = open_in(path, std::ios::binary);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") {
    throw input_error(path + ": not a pgm file");
  }
  auto next_header_int = [&](long& value) {
    // skips whitespace and '#' comment lines
    char c;
    while (in.get(c)) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      if (c == '#') {
        std::string junk;
        std::getline(in, junk);
        continue;
      }
      in.unget();
      if (!(in >> value)) break;
      return true;
    }
    return false;
  };
  long width = 0, height = 0, maxval = 0;
  if (!next_header_int(width) || !next_header_int(height) ||
      !next_header_int(maxval)) {
    throw input_error(path + ": malformed pgm header");
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw input_error(path + ": bad pgm dimensions");
  }

  DepthImage depth(height, width);
  if (magic == "P2") {
    for (long r = 0; r < height; ++r) {
      for (long c = 0; c < width; ++c) {
        long v;
        if (!(in >> v)) throw input_error(path + ": truncated pgm data");
        depth(r, c) = v * scale;
      }
    }
  } else {
    in.get();  // the single whitespace byte after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(static_cast<std::size_t>(width) * bytes);
    for (long r = 0; r < height; ++r) {
      if (!in.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
        throw input_error(path + ": truncated pgm data");
      }
      for (long c = 0; c < width; ++c) {
        // 2-byte pgm samples are big-endian
        const long v = bytes == 2 ? (buf[2 * c] << 8) | buf[2 * c + 1] : buf[c];
        depth(r, c) = v * scale;
      }
    }
  }
  return depth;
}

void write_matrix_bin(const std::string& path, const Eigen::MatrixXd& m,
                      int dtype_bytes) {
  if (dtype_bytes != 4 && dtype_bytes != 8) {
    throw input_error("matrix dtype must be 4 or 8 bytes");
  }
  auto out = open_out(path, std::ios::binary);
  out.write(kMatrixMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  put_u32(out, static_cast<std::uint32_t>(dtype_bytes));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (dtype_bytes == 8) {
        put_f64(out, m(r, c));
      } else {
        const float v = static_cast<float>(m(r, c));
        out.write(reinterpret_cast<const char*>(&v), 4);
      }
    }
  }
  if (!out) throw input_error("write failed for " + path);
}

Eigen::MatrixXd read_matrix_bin(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMatrixMagic, 4) != 0) {
    throw input_error(path + ": bad matrix magic");
  }
  const std::uint32_t rows = get_u32(in, path);
  const std::uint32_t cols = get_u32(in, path);
  const std::uint32_t dtype = get_u32(in, path);
  if (dtype != 4 && dtype != 8) throw input_error(path + ": bad matrix dtype");
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      if (dtype == 8) {
        m(r, c) = get_f64(in, path);
      } else {
        float v;
        if (!in.read(reinterpret_cast<char*>(&v), 4)) {
          throw input_error("truncated data in " + path);
        }
        m(r, c) = v;
      }
    }
  }
  return m;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path, std::ios::out);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    out << (c ? "," : "") << "f" << c;
  }
  out << "\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out << (c ? "," : "") << m(r, c);
    }
    out << "\n";
  }
  if (!out) throw input_error("write failed for " + path);
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  auto in = open_in(path, std::ios::in);
  std::string line;
  if (!std::getline(in, line)) throw input_error(path + ": empty file");
  const auto header = split(strip_cr(line), ',');
  const int cols = static_cast<int>(header.size());
  if (cols == 0) throw input_error(path + ": empty header");

  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto tok = split(line, ',');
    if (static_cast<int>(tok.size()) != cols) {
      throw input_error(path + ": row width does not match the header");
    }
    for (const auto& t : tok) values.push_back(parse_double(t, path));
    ++rows;
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = values[r * cols + c];
  }
  return m;
}

void write_map_bin(const std::string& path, const SphericalFeatureMap& map,
                   int dtype_bytes) {
  if (dtype_bytes != 4 && dtype_bytes != 8) {
    throw input_error("map dtype must be 4 or 8 bytes");
  }
  const long bins = static_cast<long>(map.W) * map.H;
  if (map.grid.rows() != bins || static_cast<long>(map.occupancy.size()) != bins) {
    throw input_error("map fields are inconsistent with W*H");
  }
  auto out = open_out(path, std::ios::binary);
  out.write(kMapMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(bins));
  put_u32(out, static_cast<std::uint32_t>(map.grid.cols()));
  put_u32(out, static_cast<std::uint32_t>(dtype_bytes));
  put_u32(out, static_cast<std::uint32_t>(map.W));
  put_u32(out, static_cast<std::uint32_t>(map.H));
  put_u32(out, static_cast<std::uint32_t>(map.grid.cols()));
  for (int a = 0; a < 3; ++a) put_f64(out, map.center(a));
  out.write(reinterpret_cast<const char*>(map.occupancy.data()), bins);
  for (Eigen::Index r = 0; r < map.grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < map.grid.cols(); ++c) {
      if (dtype_bytes == 8) {
        put_f64(out, map.grid(r, c));
      } else {
        const float v = static_cast<float>(map.grid(r, c));
        out.write(reinterpret_cast<const char*>(&v), 4);
      }
    }
  }
  if (!out) throw input_error("write failed for " + path);
}

SphericalFeatureMap read_map_bin(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMapMagic, 4) != 0) {
    throw input_error(path + ": bad map magic");
  }
  const std::uint32_t bins = get_u32(in, path);
  const std::uint32_t cols = get_u32(in, path);
  const std::uint32_t dtype = get_u32(in, path);
  const std::uint32_t W = get_u32(in, path);
  const std::uint32_t H = get_u32(in, path);
  const std::uint32_t C = get_u32(in, path);
  if (dtype != 4 && dtype != 8) throw input_error(path + ": bad map dtype");
  if (bins != W * H || cols != C) {
    throw input_error(path + ": inconsistent map header");
  }

  SphericalFeatureMap map;
  map.W = static_cast<int>(W);
  map.H = static_cast<int>(H);
  for (int a = 0; a < 3; ++a) map.center(a) = get_f64(in, path);
  map.occupancy.resize(bins);
  if (bins > 0 &&
      !in.read(reinterpret_cast<char*>(map.occupancy.data()), bins)) {
    throw input_error("truncated data in " + path);
  }
  map.grid.resize(bins, cols);
  for (std::uint32_t r = 0; r < bins; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      if (dtype == 8) {
        map.grid(r, c) = get_f64(in, path);
      } else {
        float v;
        if (!in.read(reinterpret_cast<char*>(&v), 4)) {
          throw input_error("truncated data in " + path);
        }
        map.grid(r, c) = v;
      }
    }
  }
  map.winner.assign(bins, -1);  // source indices are not serialized
  return map;
}

void write_map_channel_pgm(const std::string& path,
                           const SphericalFeatureMap& map, int channel) {
  if (channel < 0 || channel >= map.channels()) {
    throw input_error("map channel out of range");
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index b = 0; b < map.grid.rows(); ++b) {
    if (!map.occupancy[b]) continue;
    lo = std::min(lo, map.grid(b, channel));
    hi = std::max(hi, map.grid(b, channel));
  }
  auto out = open_out(path, std::ios::binary);
  out << "P5\n" << map.W << " " << map.H << "\n255\n";
  for (int v = 0; v < map.H; ++v) {
    for (int u = 0; u < map.W; ++u) {
      const int b = map.bin_index(u, v);
      unsigned char pixel = 0;
      if (map.occupancy[b]) {
        pixel = hi > lo ? static_cast<unsigned char>(std::lround(
                              (map.grid(b, channel) - lo) / (hi - lo) * 255.0))
                        : 255;
      }
      out.put(static_cast<char>(pixel));
    }
  }
  if (!out) throw input_error("write failed for " + path);
}

}  // namespace hpppf
