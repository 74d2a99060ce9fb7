#include "bintest/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace bintest {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'B', 'T', 'N', 'N'};

void put_u64(std::string& out, std::uint64_t v, int bytes = 8) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos, int bytes = 8) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) throw ModelFormatError("truncated model container");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

struct PayloadWriter {
  std::vector<double> values;
  std::size_t append(std::span<const double> v) {
    const std::size_t off = values.size();
    values.insert(values.end(), v.begin(), v.end());
    return off;
  }
};

json dense_header(const DenseLayer& l, PayloadWriter& pw) {
  json j;
  j["kind"] = "dense";
  j["rows"] = l.out_dim();
  j["cols"] = l.in_dim();
  j["weight_offset"] = pw.append(l.weight.data());
  j["bias_offset"] = pw.append(l.bias);
  return j;
}

std::span<const double> block(const std::vector<double>& payload, std::size_t offset, std::size_t count) {
  if (offset + count > payload.size()) throw ModelFormatError("parameter block outside payload");
  return {payload.data() + offset, count};
}

DenseLayer read_dense(const json& j, const std::vector<double>& payload) {
  const std::size_t rows = j.at("rows"), cols = j.at("cols");
  DenseLayer l{Matrix(rows, cols), Vector(rows)};
  const auto w = block(payload, j.at("weight_offset"), rows * cols);
  std::copy(w.begin(), w.end(), l.weight.data().begin());
  const auto b = block(payload, j.at("bias_offset"), rows);
  std::copy(b.begin(), b.end(), l.bias.begin());
  return l;
}

}  // namespace

std::string encode_model(const SplitModel& model) {
  PayloadWriter pw;
  json header;
  header["version"] = kModelFormatVersion;
  header["input_dim"] = model.features.input_dim();
  header["frozen"] = model.features.frozen();
  header["train_accuracy"] = model.train_accuracy;
  json layers = json::array();
  for (const Layer& layer : model.features.layers()) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      layers.push_back(dense_header(*d, pw));
    } else if (const auto* r = std::get_if<ReluLayer>(&layer)) {
      layers.push_back({{"kind", "relu"}, {"width", r->width}});
    } else if (const auto* q = std::get_if<QuantizeLayer>(&layer)) {
      layers.push_back({{"kind", "quantize"}, {"width", q->width}, {"levels", q->levels}, {"lo", q->lo}, {"hi", q->hi}});
    } else {
      const auto& n = std::get<NormalizeLayer>(layer);
      json j{{"kind", "normalize"}, {"width", n.width()}, {"epsilon", n.epsilon}, {"momentum", n.momentum}, {"frozen", n.frozen}};
      j["mean_offset"] = pw.append(n.mean);
      j["variance_offset"] = pw.append(n.variance);
      layers.push_back(std::move(j));
    }
  }
  header["layers"] = std::move(layers);
  header["readout"] = dense_header(model.readout, pw);
  header["payload_doubles"] = pw.values.size();

  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_u64(out, kModelFormatVersion, 4);
  put_u64(out, text.size());
  out += text;
  for (double v : pw.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

SplitModel decode_model(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw ModelFormatError("not a model container (bad magic)");
  const auto version = get_u64(bytes, 4, 4);
  if (version != kModelFormatVersion)
    throw ModelFormatError("unsupported model format version " + std::to_string(version));
  const auto header_len = get_u64(bytes, 8);
  if (16 + header_len > bytes.size()) throw ModelFormatError("truncated model header");

  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("malformed model header: ") + e.what());
  }

  try {
    if (!header.contains("version") || header.at("version") != kModelFormatVersion)
      throw ModelFormatError("model header missing or mismatched version field");
    const std::size_t count = header.at("payload_doubles");
    const std::size_t payload_pos = 16 + header_len;
    if (payload_pos + count * 8 != bytes.size()) throw ModelFormatError("payload size mismatch");
    std::vector<double> payload(count);
    for (std::size_t i = 0; i < count; ++i) payload[i] = std::bit_cast<double>(get_u64(bytes, payload_pos + 8 * i));

    SplitModel model;
    model.features = Network(header.at("input_dim").get<std::size_t>());
    for (const json& j : header.at("layers")) {
      const std::string kind = j.at("kind");
      if (kind == "dense") {
        DenseLayer d = read_dense(j, payload);
        model.features.add_dense(std::move(d.weight), std::move(d.bias));
      } else if (kind == "relu") {
        model.features.add_relu();
      } else if (kind == "quantize") {
        model.features.add_quantizer(j.at("levels"), j.at("lo"), j.at("hi"));
      } else if (kind == "normalize") {
        const std::size_t w = j.at("width");
        const auto m = block(payload, j.at("mean_offset"), w);
        const auto v = block(payload, j.at("variance_offset"), w);
        model.features.add_normalization(Vector(m.begin(), m.end()), Vector(v.begin(), v.end()), j.at("momentum"),
                                         j.at("epsilon"));
        std::get<NormalizeLayer>(model.features.mutable_layers().back()).frozen = j.at("frozen");
      } else {
        throw ModelFormatError("unknown layer kind '" + kind + "'");
      }
    }
    model.readout = read_dense(header.at("readout"), payload);
    if (model.readout.in_dim() != model.features.output_dim())
      throw ModelFormatError("readout input does not match feature width");
    model.train_accuracy = header.at("train_accuracy");
    return model;
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("malformed model header: ") + e.what());
  } catch (const DimensionError& e) {
    throw ModelFormatError(std::string("inconsistent layer shapes: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const SplitModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  const std::string bytes = encode_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SplitModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_model(ss.str());
}

}  // namespace bintest
