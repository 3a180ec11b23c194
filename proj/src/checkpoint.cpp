#include "autopinn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "autopinn/errors.hpp"

namespace autopinn {
namespace {

constexpr const char* kMagic = "autopinn-checkpoint-v1";

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ValidationError(path + ": " + what);
}

long parse_long(const std::string& path, const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(path + ": field '" + key + "' has malformed integer '" + value + "'");
  }
}

}  // namespace

void save_checkpoint(const Architecture& arch, const Eigen::VectorXd& params,
                     const std::string& path) {
  (void)arch.layers();  // throws on an inconsistent shape
  if (params.size() != arch.param_count())
    throw ValidationError("parameter vector length " + std::to_string(params.size()) +
                          " does not match architecture parameter count " +
                          std::to_string(arch.param_count()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot open checkpoint file for writing: " + path);

  out << kMagic << "\n"
      << "kind " << to_string(arch.kind) << "\n"
      << "activation " << to_string(arch.activation) << "\n"
      << "input_dim " << arch.input_dim << "\n"
      << "output_dim " << arch.output_dim << "\n"
      << "depth " << arch.depth << "\n"
      << "width " << arch.width << "\n"
      << "param_count " << arch.param_count() << "\n"
      << "layout " << arch.layout_string() << "\n"
      << "data float64-le\n";
  // Raw IEEE-754 doubles; this target is little-endian, matching the marker.
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(params.size())));
  if (!out) throw RuntimeError("failed writing checkpoint file: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open checkpoint file: " + path);

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), path, "empty file");
  require(line == kMagic, path, "unrecognized format marker '" + line + "'");

  std::string kind, activation, layout;
  long input_dim = -1, output_dim = -1, depth = -1, width = -1, param_count = -1;
  bool saw_data = false;
  while (std::getline(in, line)) {
    const size_t sep = line.find(' ');
    require(sep != std::string::npos && sep > 0 && sep + 1 < line.size(), path,
            "malformed header line '" + line + "'");
    const std::string key = line.substr(0, sep);
    const std::string value = line.substr(sep + 1);
    if (key == "kind") kind = value;
    else if (key == "activation") activation = value;
    else if (key == "input_dim") input_dim = parse_long(path, key, value);
    else if (key == "output_dim") output_dim = parse_long(path, key, value);
    else if (key == "depth") depth = parse_long(path, key, value);
    else if (key == "width") width = parse_long(path, key, value);
    else if (key == "param_count") param_count = parse_long(path, key, value);
    else if (key == "layout") layout = value;
    else if (key == "data") {
      require(value == "float64-le", path, "unsupported payload encoding '" + value + "'");
      saw_data = true;
      break;
    } else {
      throw ValidationError(path + ": unknown header field '" + key + "'");
    }
  }
  require(saw_data, path, "missing data marker");
  require(!kind.empty() && !activation.empty() && input_dim >= 0 && output_dim >= 0 &&
              depth >= 0 && width >= 0 && param_count >= 0,
          path, "incomplete header");

  Checkpoint ck;
  ck.arch.kind = net_kind_from_string(kind);
  ck.arch.activation = activation_from_string(activation);
  ck.arch.input_dim = static_cast<int>(input_dim);
  ck.arch.output_dim = static_cast<int>(output_dim);
  ck.arch.depth = static_cast<int>(depth);
  ck.arch.width = static_cast<int>(width);
  (void)ck.arch.layers();  // throws on an inconsistent shape
  require(layout.empty() || layout == ck.arch.layout_string(), path,
          "stored layout does not match the declared architecture");
  require(ck.arch.param_count() == param_count, path,
          "declared param_count " + std::to_string(param_count) +
              " does not match architecture (" + std::to_string(ck.arch.param_count()) + ")");

  ck.params.resize(param_count);
  in.read(reinterpret_cast<char*>(ck.params.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(param_count)));
  require(in.gcount() == static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(param_count)),
          path, "truncated parameter payload");
  char extra = 0;
  require(!in.read(&extra, 1), path, "trailing bytes after parameter payload");
  return ck;
}

}  // namespace autopinn
