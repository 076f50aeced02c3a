#include "sarfuse/nn/serialize.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "sarfuse/error.hpp"

namespace sarfuse::nn {

namespace {

constexpr const char* kMagic = "SARFUSE-PARAMS 1";

std::string shape_string(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

std::vector<int> parse_shape(const std::string& s) {
  std::vector<int> shape;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      shape.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw ValidationError("param file: bad shape '" + s + "'");
    }
  }
  return shape;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

std::string expect_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("param file: missing " + what);
  return line;
}

}  // namespace

void write_params(std::ostream& out, const ParamStore& params, const std::string& metadata) {
  if (metadata.find('\n') != std::string::npos) throw ValidationError("param metadata must be a single line");
  out << kMagic << '\n';
  out << "metadata " << metadata << '\n';
  out << "tensors " << params.entries().size() << '\n';
  for (const auto& e : params.entries()) {
    out << e.name << " f32 " << shape_string(e.shape) << ' ' << e.offset * 4 << ' ' << e.size << '\n';
  }
  out << "data " << params.size() * 4 << '\n';
  std::string buffer(params.size() * 4, '\0');
  const auto values = params.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values[i]);
    const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(f));
    std::memcpy(buffer.data() + i * 4, &bits, 4);
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw RuntimeError("param file: write failed");
}

ParamFile read_params(std::istream& in) {
  if (expect_line(in, "header") != kMagic) throw ValidationError("param file: bad magic");
  ParamFile file;
  const std::string meta = expect_line(in, "metadata");
  if (meta.rfind("metadata ", 0) != 0) throw ValidationError("param file: expected metadata line");
  file.metadata = meta.substr(9);

  std::size_t count = 0;
  {
    std::istringstream ss(expect_line(in, "tensor count"));
    std::string key;
    if (!(ss >> key >> count) || key != "tensors") throw ValidationError("param file: expected tensor count");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ss(expect_line(in, "tensor entry"));
    std::string name, dtype, shape;
    std::size_t offset = 0, size = 0;
    if (!(ss >> name >> dtype >> shape >> offset >> size)) throw ValidationError("param file: bad tensor entry");
    if (dtype != "f32") throw ValidationError("param file: unsupported dtype " + dtype);
    const std::size_t index = file.params.add(name, parse_shape(shape));
    const auto& info = file.params.info(index);
    if (info.offset * 4 != offset || info.size != size) {
      throw ValidationError("param file: tensor " + name + " offset/size disagree with its shape");
    }
  }
  std::size_t bytes = 0;
  {
    std::istringstream ss(expect_line(in, "data header"));
    std::string key;
    if (!(ss >> key >> bytes) || key != "data" || bytes != file.params.size() * 4) {
      throw ValidationError("param file: bad data header");
    }
  }
  std::string buffer(bytes, '\0');
  in.read(buffer.data(), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) throw ValidationError("param file: truncated payload");
  auto values = file.params.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, buffer.data() + i * 4, 4);
    values[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(bits)));
  }
  return file;
}

}  // namespace sarfuse::nn
