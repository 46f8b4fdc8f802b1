// SPDX-License-Identifier: Apache-2.0
//
// quantize, dequantize and qgemm over tensor files.

#include <map>
#include <memory>

#include "command.hpp"
#include "fp4stream/error.hpp"
#include "fp4stream/nvfp4.hpp"
#include "fp4stream/qcompute.hpp"
#include "fp4stream/rht.hpp"
#include "fp4stream/tensor_file.hpp"

namespace fp4cli {
namespace {

using namespace fp4stream;

const std::map<std::string, QuantMode> kModes{{"standard", QuantMode::Standard},
                                              {"scale-search", QuantMode::ScaleSearch}};
const std::map<std::string, DType> kRealDtypes{{"f32", DType::Float32}, {"f16", DType::Float16}};

Json dims_json(const Shape& dims) { return Json(std::vector<std::size_t>(dims.begin(), dims.end())); }

Tensor read_real(const std::string& path) {
  const TensorFile file = read_tensor(path);
  if (file.dtype == DType::PackedFp4) {
    throw Error(ErrorCode::BadDtype, path + " is already packed-fp4");
  }
  return decode_real(file);
}

PackedFp4Tensor read_or_quantize(const std::string& path, QuantMode mode, std::optional<Tensor>& real) {
  const TensorFile file = read_tensor(path);
  if (file.dtype == DType::PackedFp4) return from_tensor_file(file);
  real = decode_real(file);
  return quantize_nvfp4(*real, mode);
}

struct QuantizeOptions {
  std::string in;
  std::optional<std::string> out;
  QuantMode mode = QuantMode::ScaleSearch;
  std::optional<std::uint64_t> rht_seed;
};

struct DequantizeOptions {
  std::string in;
  std::string out;
  DType dtype = DType::Float32;
  std::optional<std::uint64_t> rht_seed;
};

struct QgemmOptions {
  std::string a;
  std::string b;
  std::optional<std::string> out;
};

}  // namespace

void add_quant_commands(CLI::App& root, Registry& registry) {
  {
    auto opt = std::make_shared<QuantizeOptions>();
    Command& cmd = add_command(root, registry, "quantize", "Quantize a real tensor file to packed FP4");
    cmd.app->add_option("--in", opt->in, "Input tensor (f32 or f16)")->required();
    cmd.app->add_option("--out", opt->out, "Packed output tensor");
    cmd.app->add_option("--mode", opt->mode, "standard | scale-search")
        ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case));
    cmd.app->add_option("--rht-seed", opt->rht_seed, "Rotate 16-element blocks with this seed first");
    cmd.run = [opt] {
      const Tensor x = read_real(opt->in);
      std::optional<RhtContext> rht;
      if (opt->rht_seed) rht.emplace(*opt->rht_seed);
      const PackedFp4Tensor q = quantize_nvfp4(rht ? rht_forward(x, *rht) : x, opt->mode);
      if (opt->out) write_tensor(*opt->out, to_tensor_file(q));
      const QuantReport r = quant_error_report(x, opt->mode, rht ? &*rht : nullptr);

      CommandOutput out;
      out.config = {{"in", opt->in},
                    {"out", opt->out ? Json(*opt->out) : Json()},
                    {"mode", opt->mode == QuantMode::Standard ? "standard" : "scale-search"},
                    {"rht_seed", opt->rht_seed ? Json(*opt->rht_seed) : Json()}};
      out.results = {{"mse", r.mse},
                     {"max_abs_err", r.max_abs_err},
                     {"fraction_blocks_scale4", r.fraction_blocks_scale4},
                     {"dims", dims_json(x.dims)},
                     {"packed_bytes", storage_bytes(q)},
                     {"global_scale", q.global_scale}};
      return out;
    };
  }
  {
    auto opt = std::make_shared<DequantizeOptions>();
    Command& cmd = add_command(root, registry, "dequantize", "Expand a packed FP4 tensor file");
    cmd.app->add_option("--in", opt->in, "Packed input tensor")->required();
    cmd.app->add_option("--out", opt->out, "Real output tensor")->required();
    cmd.app->add_option("--dtype", opt->dtype, "f32 | f16")
        ->transform(CLI::CheckedTransformer(kRealDtypes, CLI::ignore_case));
    cmd.app->add_option("--rht-seed", opt->rht_seed, "Undo the rotation applied at quantization");
    cmd.run = [opt] {
      const PackedFp4Tensor q = from_tensor_file(read_tensor(opt->in));
      Tensor x = dequantize_nvfp4(q);
      if (opt->rht_seed) x = rht_inverse(x, RhtContext(*opt->rht_seed));
      write_tensor(opt->out, encode_real(x, opt->dtype));

      CommandOutput out;
      out.config = {{"in", opt->in},
                    {"out", opt->out},
                    {"dtype", opt->dtype == DType::Float16 ? "f16" : "f32"},
                    {"rht_seed", opt->rht_seed ? Json(*opt->rht_seed) : Json()}};
      out.results = {{"dims", dims_json(x.dims)}, {"elements", x.size()}};
      return out;
    };
  }
  {
    auto opt = std::make_shared<QgemmOptions>();
    Command& cmd = add_command(root, registry, "qgemm", "C = A * B^T with both operands in FP4");
    cmd.app->add_option("--a", opt->a, "Activations, M x K (real inputs use standard scaling)")->required();
    cmd.app->add_option("--b", opt->b, "Weights, N x K (real inputs use scale search)")->required();
    cmd.app->add_option("--out", opt->out, "Output tensor, M x N f32");
    cmd.run = [opt] {
      std::optional<Tensor> a_real, b_real;
      const PackedFp4Tensor a = read_or_quantize(opt->a, QuantMode::Standard, a_real);
      const PackedFp4Tensor b = read_or_quantize(opt->b, QuantMode::ScaleSearch, b_real);
      const Tensor c = qmatmul(a, b);
      if (opt->out) write_tensor(*opt->out, encode_real(c));

      CommandOutput out;
      out.config = {{"a", opt->a}, {"b", opt->b}, {"out", opt->out ? Json(*opt->out) : Json()}};
      out.results = {{"m", c.dims[0]}, {"n", c.dims[1]}, {"k", a.inner()}};
      if (a_real && b_real) {
        const Tensor exact = matmul(*a_real, transpose(*b_real));
        out.results["mse_vs_fp64"] = mean_squared_error(c, exact);
        out.results["max_abs_err_vs_fp64"] = max_abs_error(c, exact);
      } else {
        out.results["mse_vs_fp64"] = nullptr;
        out.results["max_abs_err_vs_fp64"] = nullptr;
      }
      return out;
    };
  }
}

}  // namespace fp4cli
