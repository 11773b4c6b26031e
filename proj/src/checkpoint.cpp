#include "dmin/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dmin/errors.hpp"
#include "dmin/hash.hpp"

namespace dmin {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr const char* kFormat = "dmin-checkpoint";

std::string encode_tensor(const Tensor& t) {
  const auto bytes = std::as_bytes(t.data());
  return base64_encode(
      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

Tensor decode_tensor(const json& shape, const std::string& data, const std::string& name) {
  const std::string raw = base64_decode(data);
  if (raw.size() % sizeof(double) != 0) throw DataError("checkpoint corrupted: tensor " + name + " has a partial value");
  std::vector<double> values(raw.size() / sizeof(double));
  std::memcpy(values.data(), raw.data(), raw.size());
  const auto dims = shape.get<std::vector<std::size_t>>();
  std::size_t expected = 1;
  for (auto d : dims) expected *= d;
  if (dims.empty() || dims.size() > 2 || expected != values.size()) {
    throw DataError("checkpoint corrupted: tensor " + name + " shape does not match its data");
  }
  return dims.size() == 1 ? Tensor::vector(std::move(values)) : Tensor::matrix(dims[0], dims[1], std::move(values));
}

json shape_of(const Tensor& t) {
  return t.rank() == 1 ? json::array({t.size()}) : json::array({t.rows(), t.cols()});
}

}  // namespace

std::string serialize_checkpoint(const Model& model) {
  model.validate();
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kCheckpointVersion;
  doc["model"] = to_json(model.config);
  doc["trained_stages"] = model.trained_stages;
  json tensors = json::array();
  for (const auto& [name, t] : model.parameters()) {
    tensors.push_back({{"name", name}, {"shape", shape_of(*t)}, {"data", encode_tensor(*t)}});
  }
  doc["tensors"] = std::move(tensors);
  doc["checksum"] = hex64(fnv1a64(doc.dump()));
  return doc.dump(1) + "\n";
}

Model parse_checkpoint(std::string_view text, std::optional<std::size_t> expected_dim) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("checkpoint corrupted: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != kFormat) throw DataError("not a dmin checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    const std::string checksum = doc.at("checksum").get<std::string>();
    json body = doc;
    body.erase("checksum");
    if (hex64(fnv1a64(body.dump())) != checksum) throw DataError("checkpoint corrupted: checksum mismatch");

    Model model;
    model.config = model_config_from_json(doc.at("model"));
    if (expected_dim && *expected_dim != model.config.dim()) {
      throw ShapeError("checkpoint has d=" + std::to_string(model.config.dim()) + ", expected d=" +
                       std::to_string(*expected_dim));
    }
    model.trained_stages = doc.at("trained_stages").get<int>();
    model.encoder = Encoder(model.config.encoder);
    model.classifier = CosineClassifier{Tensor::zeros(model.config.base_classes, model.config.dim()), Tensor::scalar(0.0)};
    model.dmm = RoutingParams::zeros(model.config.dmm);
    if (!model.config.share_routing) model.qim = RoutingParams::zeros(model.config.qim);

    auto slots = model.parameters();
    const json& tensors = doc.at("tensors");
    if (tensors.size() != slots.size()) {
      throw DataError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model needs " +
                      std::to_string(slots.size()));
    }
    for (std::size_t k = 0; k < slots.size(); ++k) {
      const json& entry = tensors[k];
      const std::string name = entry.at("name").get<std::string>();
      if (name != slots[k].name) throw DataError("checkpoint tensor " + name + " where " + slots[k].name + " was expected");
      Tensor t = decode_tensor(entry.at("shape"), entry.at("data").get<std::string>(), name);
      if (!t.same_shape(*slots[k].value)) {
        throw ShapeError("checkpoint tensor " + name + " has shape " + t.shape_string() + ", expected " +
                         slots[k].value->shape_string());
      }
      if (!t.all_finite()) throw DataError("checkpoint tensor " + name + " holds non-finite values");
      *slots[k].value = std::move(t);
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint corrupted: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const std::string text = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), expected_dim);
}

}  // namespace dmin
