#include "camda/cyclegan/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "camda/netzoo/arch_io.hpp"

namespace camda::cyclegan {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr const char* kMagic = "camda-checkpoint 1";

struct TensorRecord {
  std::string network, name;
  ad::Shape shape;
  std::size_t offset = 0, bytes = 0;
};

struct NetworkRecord {
  std::string name;
  std::string arch_text;
};

struct Manifest {
  std::map<std::string, std::string> metadata;
  std::vector<NetworkRecord> networks;
  std::vector<TensorRecord> tensors;
};

Manifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw CheckpointError("no manifest in " + dir.string());
  Manifest m;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw CheckpointError((dir / "manifest.txt").string() + ":" + std::to_string(lineno) + ": " + why);
  };
  bool header = false, in_arch = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!header) {
      if (line != kMagic) fail("not a checkpoint manifest");
      header = true;
      continue;
    }
    if (in_arch) {
      if (line == "arch-end") {
        in_arch = false;
      } else {
        m.networks.back().arch_text += line + "\n";
      }
      continue;
    }
    std::istringstream s(line);
    std::string key;
    if (!(s >> key)) continue;
    if (key == "endianness") {
      std::string v;
      s >> v;
      if (v != "little") fail("unsupported endianness " + v);
    } else if (key == "dtype") {
      std::string v;
      s >> v;
      if (v != "float32") fail("unsupported dtype " + v);
    } else if (key == "meta") {
      std::string k, v;
      s >> k;
      std::getline(s >> std::ws, v);
      m.metadata[k] = v;
    } else if (key == "network") {
      NetworkRecord n;
      if (!(s >> n.name)) fail("network without a name");
      m.networks.push_back(n);
    } else if (key == "arch-begin") {
      if (m.networks.empty()) fail("architecture outside a network section");
      in_arch = true;
    } else if (key == "tensor") {
      TensorRecord t;
      std::string off_kw, bytes_kw;
      if (!(s >> t.network >> t.name >> t.shape.n >> t.shape.c >> t.shape.h >> t.shape.w >> off_kw >> t.offset >>
            bytes_kw >> t.bytes) ||
          off_kw != "offset" || bytes_kw != "bytes") {
        fail("malformed tensor record");
      }
      if (t.bytes != t.shape.numel() * sizeof(float)) fail("tensor byte count does not match shape");
      m.tensors.push_back(t);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!header) fail("empty manifest");
  if (in_arch) fail("unterminated architecture block");
  return m;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const std::vector<NamedNetwork>& networks,
                     const std::map<std::string, std::string>& metadata) {
  fs::path tmp = dir;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  std::ostringstream manifest;
  manifest << kMagic << "\nendianness little\ndtype float32\n";
  for (const auto& [k, v] : metadata) manifest << "meta " << k << " " << v << "\n";
  {
    std::ofstream bin(tmp / "params.bin", std::ios::binary);
    if (!bin) throw CheckpointError("cannot write " + (tmp / "params.bin").string());
    std::size_t offset = 0;
    for (const auto& [name, net] : networks) {
      manifest << "network " << name << "\narch-begin\n" << netzoo::to_text(net->spec()) << "arch-end\n";
      for (const auto& e : net->state()) {
        const std::size_t bytes = e.data.size() * sizeof(float);
        manifest << "tensor " << name << " " << e.name << " " << e.shape.n << " " << e.shape.c << " " << e.shape.h
                 << " " << e.shape.w << " offset " << offset << " bytes " << bytes << "\n";
        bin.write(reinterpret_cast<const char*>(e.data.data()), static_cast<std::streamsize>(bytes));
        offset += bytes;
      }
    }
    if (!bin) throw CheckpointError("write failed for " + (tmp / "params.bin").string());
  }
  {
    std::ofstream out(tmp / "manifest.txt");
    out << manifest.str();
    if (!out) throw CheckpointError("write failed for " + (tmp / "manifest.txt").string());
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

netzoo::Network<float> load_network(const fs::path& dir, const std::string& name) {
  const Manifest m = read_manifest(dir);
  auto it = std::find_if(m.networks.begin(), m.networks.end(), [&](const NetworkRecord& n) { return n.name == name; });
  if (it == m.networks.end()) throw CheckpointError("checkpoint " + dir.string() + " has no network '" + name + "'");
  auto net = netzoo::Network<float>::build(netzoo::parse_architecture(it->arch_text), 0);

  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw CheckpointError("cannot open " + (dir / "params.bin").string());
  bin.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::size_t>(bin.tellg());
  std::vector<const TensorRecord*> records;
  for (const auto& t : m.tensors)
    if (t.network == name) records.push_back(&t);
  auto state = net.state();
  if (records.size() != state.size()) {
    throw CheckpointError("network '" + name + "' expects " + std::to_string(state.size()) + " tensors, manifest has " +
                          std::to_string(records.size()));
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    const TensorRecord& r = *records[i];
    if (r.name != state[i].name || !(r.shape == state[i].shape)) {
      throw CheckpointError("tensor mismatch for " + name + "." + state[i].name + ": manifest has " + r.name + " " +
                            r.shape.str());
    }
    if (r.offset + r.bytes > file_size) throw CheckpointError("params.bin is truncated");
    bin.seekg(static_cast<std::streamoff>(r.offset));
    bin.read(reinterpret_cast<char*>(state[i].data.data()), static_cast<std::streamsize>(r.bytes));
    if (!bin) throw CheckpointError("read failed for " + r.name);
  }
  return net;
}

std::vector<std::string> checkpoint_networks(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& n : read_manifest(dir).networks) out.push_back(n.name);
  return out;
}

std::map<std::string, std::string> checkpoint_metadata(const fs::path& dir) { return read_manifest(dir).metadata; }

}  // namespace camda::cyclegan
