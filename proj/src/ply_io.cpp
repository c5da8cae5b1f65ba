#include "splatmap/ply_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace splatmap {

static_assert(std::endian::native == std::endian::little,
              "PLY writer assumes a little-endian host");

namespace {

[[noreturn]] void io_fail(const std::filesystem::path& path,
                          const std::string& what) {
  throw std::runtime_error("ply: " + path.string() + ": " + what);
}

struct Property {
  std::string name;
  int size = 4;       // bytes
  bool is_float = false;
};

int type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" ||
      t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  return -1;
}

}  // namespace

void save_map(const GaussianMap& map, const std::filesystem::path& path) {
  validate_map(map);
  std::ofstream out(path, std::ios::binary);
  if (!out) io_fail(path, "cannot open for writing");

  const int frgb = map.rgb_feature_size();
  const int fsem = map.sem_feature_size();

  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n";
  header << "comment sh_degree_rgb " << map.sh_degree_rgb << "\n";
  header << "comment sh_degree_sem " << map.sh_degree_sem << "\n";
  header << "element vertex " << map.size() << "\n";
  for (const char* n : {"x", "y", "z", "radius", "opacity"})
    header << "property float " << n << "\n";
  for (int i = 0; i < frgb; ++i) header << "property float f_rgb_" << i << "\n";
  for (int i = 0; i < fsem; ++i) header << "property float f_sem_" << i << "\n";
  header << "property int source_kf\nproperty int iter_added\n";
  header << "end_header\n";
  out << header.str();

  std::vector<char> record((5 + frgb + fsem) * 4 + 8);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const GaussianPrimitive& p = map.primitives[i];
    char* w = record.data();
    auto put_f = [&w](double v) {
      const float f = static_cast<float>(v);
      std::memcpy(w, &f, 4);
      w += 4;
    };
    auto put_i = [&w](std::int32_t v) {
      std::memcpy(w, &v, 4);
      w += 4;
    };
    put_f(p.position.x());
    put_f(p.position.y());
    put_f(p.position.z());
    put_f(p.radius);
    put_f(p.opacity);
    for (double v : p.rgb_feature) put_f(v);
    for (double v : p.semantic_feature) put_f(v);
    put_i(map.meta[i].source_keyframe);
    put_i(map.meta[i].iteration_added);
    out.write(record.data(), static_cast<std::streamsize>(record.size()));
  }
  if (!out) io_fail(path, "write failed");
}

GaussianMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open for reading");

  std::string line;
  if (!std::getline(in, line) || line != "ply") io_fail(path, "not a PLY file");
  if (!std::getline(in, line) || line != "format binary_little_endian 1.0")
    io_fail(path, "unsupported PLY format (need binary_little_endian 1.0)");

  GaussianMap map;
  int sh_rgb = -1, sh_sem = -1;
  std::size_t vertex_count = 0;
  std::vector<Property> props;
  bool in_vertex = false;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment") {
      std::string key;
      ls >> key;
      if (key == "sh_degree_rgb") ls >> sh_rgb;
      if (key == "sh_degree_sem") ls >> sh_sem;
    } else if (tok == "element") {
      std::string name;
      ls >> name;
      in_vertex = (name == "vertex");
      if (in_vertex) ls >> vertex_count;
    } else if (tok == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") io_fail(path, "list properties are not supported");
      const int sz = type_size(type);
      if (sz < 0) io_fail(path, "unknown property type '" + type + "'");
      props.push_back({name, sz, type == "float" || type == "float32"});
    }
  }
  if (!in) io_fail(path, "truncated header");

  std::map<std::string, int> index;
  std::size_t stride = 0;
  std::vector<std::size_t> offsets(props.size());
  for (std::size_t i = 0; i < props.size(); ++i) {
    index[props[i].name] = static_cast<int>(i);
    offsets[i] = stride;
    stride += props[i].size;
  }

  auto required = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end())
      io_fail(path, "schema error: missing property '" + name + "'");
    if (!props[it->second].is_float)
      io_fail(path, "schema error: property '" + name + "' must be float");
    return it->second;
  };

  // Feature counts come from the schema; header comments, when present,
  // must agree.
  int frgb = 0, fsem = 0;
  while (index.count("f_rgb_" + std::to_string(frgb))) ++frgb;
  while (index.count("f_sem_" + std::to_string(fsem))) ++fsem;
  auto degree_for = [&](int count, const char* what) {
    for (int d = 0; d <= kShMaxDegree; ++d)
      if (count == 3 * sh_coeff_count(d)) return d;
    io_fail(path, std::string("schema error: ") + what +
                      " property count does not match any SH degree");
  };
  if (frgb == 0) io_fail(path, "schema error: missing property 'f_rgb_0'");
  if (fsem == 0) io_fail(path, "schema error: missing property 'f_sem_0'");
  map.sh_degree_rgb = degree_for(frgb, "f_rgb");
  map.sh_degree_sem = degree_for(fsem, "f_sem");
  if (sh_rgb >= 0 && sh_rgb != map.sh_degree_rgb)
    io_fail(path, "header sh_degree_rgb disagrees with the property list");
  if (sh_sem >= 0 && sh_sem != map.sh_degree_sem)
    io_fail(path, "header sh_degree_sem disagrees with the property list");

  const int ix = required("x"), iy = required("y"), iz = required("z");
  const int ir = required("radius"), io = required("opacity");
  std::vector<int> irgb(frgb), isem(fsem);
  for (int i = 0; i < frgb; ++i) irgb[i] = required("f_rgb_" + std::to_string(i));
  for (int i = 0; i < fsem; ++i) isem[i] = required("f_sem_" + std::to_string(i));
  const int ikf = index.count("source_kf") ? index["source_kf"] : -1;
  const int iit = index.count("iter_added") ? index["iter_added"] : -1;

  std::vector<char> record(stride);
  auto get_f = [&](int prop) {
    float f;
    std::memcpy(&f, record.data() + offsets[prop], 4);
    return static_cast<double>(f);
  };
  auto get_i = [&](int prop) {
    std::int32_t v;
    std::memcpy(&v, record.data() + offsets[prop], 4);
    return v;
  };

  map.primitives.reserve(vertex_count);
  map.meta.reserve(vertex_count);
  for (std::size_t n = 0; n < vertex_count; ++n) {
    in.read(record.data(), static_cast<std::streamsize>(stride));
    if (!in) io_fail(path, "truncated vertex data at record " +
                               std::to_string(n));
    GaussianPrimitive p;
    p.position = Vec3(get_f(ix), get_f(iy), get_f(iz));
    p.radius = get_f(ir);
    p.opacity = get_f(io);
    p.rgb_feature.resize(frgb);
    p.semantic_feature.resize(fsem);
    for (int i = 0; i < frgb; ++i) p.rgb_feature[i] = get_f(irgb[i]);
    for (int i = 0; i < fsem; ++i) p.semantic_feature[i] = get_f(isem[i]);
    PrimitiveMeta m;
    if (ikf >= 0) m.source_keyframe = get_i(ikf);
    if (iit >= 0) m.iteration_added = get_i(iit);
    map.add(std::move(p), m);
  }

  try {
    validate_map(map);
  } catch (const std::invalid_argument& e) {
    io_fail(path, e.what());
  }
  return map;
}

}  // namespace splatmap
