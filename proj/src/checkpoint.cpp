// SPDX-License-Identifier: Apache-2.0

#include "lioncub/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "json.hpp"
#include "lioncub/errors.hpp"
#include "lioncub/wire.hpp"

namespace lioncub {

namespace {

std::filesystem::path with_ext(const std::filesystem::path& prefix,
                               const char* ext) {
  auto p = prefix;
  p += ext;
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& prefix,
                     const WorkerState& state, const LionHyper& hyper) {
  state.params.require_same_shape(state.momentum, "checkpoint");
  nlohmann::json meta;
  meta["iteration"] = state.iteration;
  meta["format"] = "f32le";
  meta["hyper"] = {
      {"beta1", hyper.beta1},
      {"beta2", hyper.beta2},
      {"lr", hyper.lr.base},
      {"lr_schedule",
       hyper.lr.kind == LrSchedule::Kind::kCosine ? "cosine" : "constant"},
      {"min_lr", hyper.lr.min_lr},
      {"total_steps", hyper.lr.total_steps},
      {"weight_decay", hyper.weight_decay},
      {"decay_mode",
       hyper.decay_mode == DecayMode::kDecoupled ? "decoupled" : "literal"},
  };
  meta["layers"] = nlohmann::json::array();

  wire::Bytes blob;
  for (std::size_t l = 0; l < state.params.size(); ++l) {
    const auto& p = state.params[l];
    meta["layers"].push_back({{"name", p.name}, {"shape", p.shape}});
    for (double v : p.values) wire::put_f32(blob, static_cast<float>(v));
    for (double v : state.momentum[l].values) {
      wire::put_f32(blob, static_cast<float>(v));
    }
  }

  std::ofstream bin(with_ext(prefix, ".bin"), std::ios::binary);
  bin.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size()));
  std::ofstream js(with_ext(prefix, ".json"));
  js << meta.dump(2) << '\n';
  if (!bin || !js) throw std::runtime_error("cannot write checkpoint " + prefix.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& prefix) {
  std::ifstream js(with_ext(prefix, ".json"));
  std::ifstream bin(with_ext(prefix, ".bin"), std::ios::binary);
  if (!js || !bin) throw FormatError("checkpoint " + prefix.string() + " not found");

  Checkpoint ck;
  try {
    const auto meta = nlohmann::json::parse(js);
    const wire::Bytes blob((std::istreambuf_iterator<char>(bin)),
                           std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    for (const auto& l : meta.at("layers")) {
      const auto name = l.at("name").get<std::string>();
      const auto shape = l.at("shape").get<std::vector<std::size_t>>();
      ck.state.params.add(name, shape);
      ck.state.momentum.add(name, shape);
      for (auto* set : {&ck.state.params, &ck.state.momentum}) {
        for (auto& v : set->at(name).values) {
          v = wire::get_f32(blob, pos);
          pos += 4;
        }
      }
    }
    if (pos != blob.size()) throw FormatError("checkpoint blob has trailing bytes");
    ck.state.iteration = meta.at("iteration").get<std::uint64_t>();
    const auto& h = meta.at("hyper");
    ck.hyper.beta1 = h.at("beta1").get<double>();
    ck.hyper.beta2 = h.at("beta2").get<double>();
    ck.hyper.lr.base = h.at("lr").get<double>();
    ck.hyper.lr.kind = h.at("lr_schedule").get<std::string>() == "cosine"
                           ? LrSchedule::Kind::kCosine
                           : LrSchedule::Kind::kConstant;
    ck.hyper.lr.min_lr = h.at("min_lr").get<double>();
    ck.hyper.lr.total_steps = h.at("total_steps").get<std::uint64_t>();
    ck.hyper.weight_decay = h.at("weight_decay").get<double>();
    ck.hyper.decay_mode = h.at("decay_mode").get<std::string>() == "literal"
                              ? DecayMode::kLiteral
                              : DecayMode::kDecoupled;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  return ck;
}

}  // namespace lioncub
