#include "cabm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace cabm {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'B', 'M', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i32(std::ostream& out, int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw ParseError("truncated checkpoint");
  return v;
}
int32_t read_i32(std::istream& in) {
  int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw ParseError("truncated checkpoint");
  return v;
}

void write_blob(std::ostream& out, const std::string& name, const TensorF& t) {
  write_u32(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_i32(out, static_cast<int32_t>(t.shape.n));
  write_i32(out, static_cast<int32_t>(t.shape.c));
  write_i32(out, static_cast<int32_t>(t.shape.h));
  write_i32(out, static_cast<int32_t>(t.shape.w));
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

std::pair<std::string, TensorF> read_blob(std::istream& in) {
  const uint32_t name_len = read_u32(in);
  if (name_len > 4096) throw ParseError("checkpoint blob name too long");
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  Shape4 shape{read_i32(in), read_i32(in), read_i32(in), read_i32(in)};
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0 || shape.numel() > (1ll << 28))
    throw ParseError("checkpoint blob '" + name + "' has a bad shape");
  TensorF t(shape);
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!in) throw ParseError("truncated checkpoint blob '" + name + "'");
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const std::string& path, SuperNetF& net,
                     const std::vector<SelectorMLPF>* selectors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);

  const SupernetSpec& spec = net.spec();
  write_i32(out, spec.num_blocks);
  write_i32(out, spec.channels);
  write_i32(out, spec.scale);
  write_i32(out, spec.weight_bit);
  write_u32(out, static_cast<uint32_t>(spec.candidate_bits.size()));
  for (int b : spec.candidate_bits) write_i32(out, b);

  const bool has_sel = selectors != nullptr && !selectors->empty();
  out.put(has_sel ? 1 : 0);
  uint32_t hidden = 0;
  if (has_sel) {
    if (static_cast<int>(selectors->size()) != spec.quantized_layers())
      throw Error("save_checkpoint: selector count does not match quantized layer count");
    hidden = static_cast<uint32_t>((*selectors)[0].hidden());
  }
  write_u32(out, hidden);

  std::vector<std::pair<std::string, TensorF*>> blobs = net.named_parameters();
  if (has_sel) {
    auto& sels = *const_cast<std::vector<SelectorMLPF>*>(selectors);
    for (size_t i = 0; i < sels.size(); ++i) {
      auto named = sels[i].named_parameters("sel" + std::to_string(i));
      blobs.insert(blobs.end(), named.begin(), named.end());
    }
  }
  write_u32(out, static_cast<uint32_t>(blobs.size()));
  for (auto& [name, tensor] : blobs) write_blob(out, name, *tensor);
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("'" + path + "' is not a checkpoint file");
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));

  SupernetSpec spec;
  spec.num_blocks = read_i32(in);
  spec.channels = read_i32(in);
  spec.scale = read_i32(in);
  spec.weight_bit = read_i32(in);
  const uint32_t k = read_u32(in);
  if (k == 0 || k > 16) throw ParseError("bad candidate bit count in checkpoint");
  spec.candidate_bits.clear();
  for (uint32_t i = 0; i < k; ++i) spec.candidate_bits.push_back(read_i32(in));
  spec.validate();

  const bool has_sel = in.get() == 1;
  const uint32_t hidden = read_u32(in);

  LoadedCheckpoint loaded{spec, SuperNetF(spec, 0), has_sel, {}};
  if (has_sel) loaded.selectors = make_selectors<float>(spec, 0, static_cast<int>(hidden));

  std::map<std::string, TensorF*> want;
  for (auto& [name, tensor] : loaded.net.named_parameters()) want[name] = tensor;
  for (size_t i = 0; i < loaded.selectors.size(); ++i)
    for (auto& [name, tensor] : loaded.selectors[i].named_parameters("sel" + std::to_string(i)))
      want[name] = tensor;

  const uint32_t num_blobs = read_u32(in);
  if (num_blobs != want.size())
    throw ParseError("checkpoint has " + std::to_string(num_blobs) + " blobs, expected " +
                     std::to_string(want.size()));
  for (uint32_t i = 0; i < num_blobs; ++i) {
    auto [name, tensor] = read_blob(in);
    auto it = want.find(name);
    if (it == want.end()) throw ParseError("unexpected checkpoint blob '" + name + "'");
    if (!(it->second->shape == tensor.shape))
      throw ParseError("checkpoint blob '" + name + "' shape " + tensor.shape.str() +
                       " != expected " + it->second->shape.str());
    it->second->data = std::move(tensor.data);
    want.erase(it);
  }
  if (!want.empty()) throw ParseError("checkpoint missing blob '" + want.begin()->first + "'");
  return loaded;
}

}  // namespace cabm
