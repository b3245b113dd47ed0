#include "sfeuot/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace sfeuot {
namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw std::runtime_error("checkpoint: truncated data");
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NetworkParams>& nets) {
  if (nets.size() > 255) throw std::invalid_argument("checkpoint: too many networks");
  std::vector<std::uint8_t> out{'S', 'F', 'E', 'U'};
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(nets.size()));
  for (const auto& net : nets) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.num_layers()));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_dims()[l]));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_dims()[l + 1]));
      for (double w : net.weights(l)) put<double>(out, w);
      for (double b : net.biases(l)) put<double>(out, b);
    }
  }
  return out;
}

std::vector<NetworkParams> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "SFEU", 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader r(body);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint8_t>();
  std::vector<NetworkParams> nets;
  for (std::uint8_t n = 0; n < count; ++n) {
    const auto layers = r.get<std::uint32_t>();
    if (layers == 0) throw std::runtime_error("checkpoint: network without layers");
    std::vector<std::size_t> dims;
    std::vector<double> values;
    for (std::uint32_t l = 0; l < layers; ++l) {
      const auto in = r.get<std::uint32_t>();
      const auto out = r.get<std::uint32_t>();
      if (l == 0) {
        dims.push_back(in);
      } else if (dims.back() != in) {
        throw std::runtime_error("checkpoint: layer dims do not chain");
      }
      dims.push_back(out);
      for (std::uint64_t i = 0; i < std::uint64_t{in} * out + out; ++i) values.push_back(r.get<double>());
    }
    NetworkParams net(dims);
    std::copy(values.begin(), values.end(), net.flat().begin());
    nets.push_back(std::move(net));
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return nets;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<NetworkParams>& nets) {
  const auto bytes = encode_checkpoint(nets);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + tmp.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string());
}

std::vector<NetworkParams> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + tmp.string());
    f << content;
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string());
}

}  // namespace sfeuot
