#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "modex/error.hpp"
#include "modex/gat.hpp"

namespace modex {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[5] = {'M', 'M', 'C', 'K', '1'};
constexpr std::uint8_t kVersion = 1;

constexpr const char* kNames[] = {"proj_weight",    "proj_bias",      "layer1.weight",
                                  "layer1.att_src", "layer1.att_dst", "layer2.weight",
                                  "layer2.att_src", "layer2.att_dst"};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(ErrorCode::kReadFailure, "truncated checkpoint");
  }
  return value;
}

}  // namespace

void save_checkpoint(std::ostream& out, const GatModel& model) {
  out.write(kMagic, 5);
  put<std::uint8_t>(out, kVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(model.mode));
  const auto params = model.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string name = kNames[k];
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params[k]->rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params[k]->cols()));
    out.write(reinterpret_cast<const char*>(params[k]->data().data()),
              static_cast<std::streamsize>(params[k]->size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::kWriteFailure, "failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const GatModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kWriteFailure, "cannot open " + path.string() + " for writing");
  save_checkpoint(out, model);
}

GatModel load_checkpoint(std::istream& in) {
  char magic[5];
  if (!in.read(magic, 5) || std::string(magic, 5) != std::string(kMagic, 5)) {
    throw Error(ErrorCode::kBadMagic, "not a model checkpoint");
  }
  if (get<std::uint8_t>(in) != kVersion) {
    throw Error(ErrorCode::kBadMagic, "unsupported checkpoint version");
  }
  const auto mode_tag = get<std::uint8_t>(in);
  if (mode_tag > static_cast<std::uint8_t>(Mode::kMultimodal)) {
    throw Error(ErrorCode::kBadMagic, "unknown mode tag in checkpoint");
  }
  // Reference shapes come from a freshly initialised model of the same mode.
  GatModel model = init_model(static_cast<Mode>(mode_tag), 0);
  auto params = model.parameters();
  if (get<std::uint32_t>(in) != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "checkpoint tensor count mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::string name(get<std::uint16_t>(in), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size())) || name != kNames[k]) {
      throw Error(ErrorCode::kShapeMismatch, "unexpected checkpoint tensor '" + name + "'");
    }
    const std::size_t rows = get<std::uint32_t>(in);
    const std::size_t cols = get<std::uint32_t>(in);
    if (rows != params[k]->rows() || cols != params[k]->cols()) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint tensor '" + name + "' has wrong shape");
    }
    std::vector<double> data(rows * cols);
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw Error(ErrorCode::kReadFailure, "truncated checkpoint");
    }
    *params[k] = Tensor(rows, cols, std::move(data));
  }
  return model;
}

GatModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kReadFailure, "cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace modex
