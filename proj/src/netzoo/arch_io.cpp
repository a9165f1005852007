#include "camda/netzoo/arch_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace camda::netzoo {

namespace {

const char* norm_name(Norm n) {
  switch (n) {
    case Norm::None: return "none";
    case Norm::Batch: return "batch";
    case Norm::Instance: return "instance";
  }
  return "none";
}

const char* act_name(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::LeakyRelu: return "lrelu";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "none";
}

int parse_int(const std::string& value, const std::string& key, int line) {
  int out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ArchitectureParseError(line, "invalid integer '" + value + "' for key '" + key + "'");
  }
  return out;
}

Norm parse_norm(const std::string& v, int line) {
  if (v == "none") return Norm::None;
  if (v == "batch") return Norm::Batch;
  if (v == "instance") return Norm::Instance;
  throw ArchitectureParseError(line, "unknown norm '" + v + "'");
}

Activation parse_act(const std::string& v, int line) {
  if (v == "none") return Activation::None;
  if (v == "lrelu" || v == "leaky_relu") return Activation::LeakyRelu;
  if (v == "relu") return Activation::Relu;
  if (v == "tanh") return Activation::Tanh;
  throw ArchitectureParseError(line, "unknown activation '" + v + "'");
}

ad::PadMode parse_pad_mode(const std::string& v, int line) {
  if (v == "zero") return ad::PadMode::Zero;
  if (v == "reflect") return ad::PadMode::Reflect;
  throw ArchitectureParseError(line, "unknown pad mode '" + v + "'");
}

std::map<std::string, std::string> parse_fields(std::istringstream& in, int line) {
  std::map<std::string, std::string> fields;
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == token.size()) {
      throw ArchitectureParseError(line, "expected key=value, got '" + token + "'");
    }
    auto [it, inserted] = fields.emplace(token.substr(0, eq), token.substr(eq + 1));
    if (!inserted) throw ArchitectureParseError(line, "duplicate key '" + it->first + "'");
  }
  return fields;
}

}  // namespace

std::string to_text(const ArchitectureSpec& spec) {
  std::ostringstream os;
  os << "arch name=" << spec.name << " in=" << spec.in_channels << '\n';
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerKind::ResidualBlock) {
      os << "resblock c=" << l.out_channels << " norm=" << norm_name(l.norm) << '\n';
      continue;
    }
    os << (l.kind == LayerKind::Conv ? "conv" : "convt") << " c=" << l.out_channels
       << " k=" << l.kernel << " s=" << l.stride << " pad=" << l.padding;
    if (l.pad_mode == ad::PadMode::Reflect) os << " padmode=reflect";
    if (l.kind == LayerKind::ConvTranspose) os << " outpad=" << l.output_padding;
    os << " norm=" << norm_name(l.norm) << " act=" << act_name(l.activation) << '\n';
  }
  return os.str();
}

ArchitectureSpec parse_architecture(const std::string& text, const std::string& default_name) {
  ArchitectureSpec spec;
  spec.name = default_name;
  spec.in_channels = 3;
  std::istringstream lines(text);
  std::string raw;
  int line = 0;
  bool seen_header = false;
  while (std::getline(lines, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream in(raw);
    std::string kind;
    if (!(in >> kind)) continue;
    auto fields = parse_fields(in, line);
    auto take = [&](const std::string& key) -> std::optional<std::string> {
      auto it = fields.find(key);
      if (it == fields.end()) return std::nullopt;
      std::string v = it->second;
      fields.erase(it);
      return v;
    };
    auto take_int = [&](const std::string& key, std::optional<int> fallback) {
      if (auto v = take(key)) return parse_int(*v, key, line);
      if (!fallback) throw ArchitectureParseError(line, "missing required key '" + key + "'");
      return *fallback;
    };

    if (kind == "arch") {
      if (seen_header || !spec.layers.empty()) {
        throw ArchitectureParseError(line, "'arch' header must come first and only once");
      }
      seen_header = true;
      if (auto v = take("name")) spec.name = *v;
      spec.in_channels = take_int("in", 3);
    } else if (kind == "conv" || kind == "convt" || kind == "resblock") {
      LayerSpec l;
      l.out_channels = take_int("c", std::nullopt);
      if (kind == "resblock") {
        l.kind = LayerKind::ResidualBlock;
        l.kernel = 3;
        l.stride = 1;
        l.padding = 1;
        l.pad_mode = ad::PadMode::Reflect;
      } else {
        l.kind = kind == "conv" ? LayerKind::Conv : LayerKind::ConvTranspose;
        l.kernel = take_int("k", std::nullopt);
        l.stride = take_int("s", 1);
        l.padding = take_int("pad", 0);
        if (auto v = take("padmode")) l.pad_mode = parse_pad_mode(*v, line);
        if (l.kind == LayerKind::ConvTranspose) l.output_padding = take_int("outpad", 0);
        if (auto v = take("act")) l.activation = parse_act(*v, line);
      }
      if (auto v = take("norm")) l.norm = parse_norm(*v, line);
      spec.layers.push_back(l);
    } else {
      throw ArchitectureParseError(line, "unknown layer kind '" + kind + "'");
    }
    if (!fields.empty()) {
      throw ArchitectureParseError(line, "unknown key '" + fields.begin()->first + "' for '" +
                                             kind + "'");
    }
  }
  if (spec.layers.empty()) throw ArchitectureParseError(line, "architecture has no layers");
  try {
    validate(spec);
  } catch (const ArchitectureError& e) {
    throw ArchitectureParseError(line, e.what());
  }
  return spec;
}

ArchitectureSpec load_architecture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArchitectureError("cannot open architecture file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_architecture(buffer.str(), path.stem().string());
}

void save_architecture(const ArchitectureSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ArchitectureError("cannot write architecture file " + path.string());
  out << to_text(spec);
}

}  // namespace camda::netzoo
