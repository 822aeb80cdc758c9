#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace handkin {

enum class LayerKind {
  conv,
  deconv,
  depthwise_conv,
  depthwise_deconv,
  pointwise,
  fully_connected,
  squeeze_excitation,
  pool,
  elementwise,
};

enum class PoolMode {
  window,  // k x k window with the layer stride
  global,  // -> 1 x 1
  rows,    // average over H -> 1 x W
  cols,    // average over W -> H x 1
};

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  int kernel = 1;
  int in_channels = 1;
  int out_channels = 1;
  int stride = 1;
  int groups = 1;
  int se_ratio = 4;  // squeeze_excitation: hidden width = max(1, C / se_ratio)
  PoolMode pool_mode = PoolMode::window;

  void validate() const;
};

struct TensorShape {
  int c = 0, h = 0, w = 0;
  bool operator==(const TensorShape&) const = default;
};

// Output shape with "same" padding: convolutions give ceil(H / s),
// deconvolutions H * s. Throws ShapeError when the input does not fit.
TensorShape layer_output(const LayerSpec& layer, const TensorShape& in);

// Multiply-accumulates of one layer on an input of in_h x in_w.
//   conv kinds (incl. deconv): k^2 (C_in / groups) C_out H_out W_out
//   fully_connected: in * out
//   squeeze_excitation: 2 C (C / r) + C H W (two FC layers plus rescaling)
//   pool, elementwise: 0
std::int64_t layer_macs(const LayerSpec& layer, int in_h, int in_w);

// Graph entries: layers plus markers.
//   input C D   set the tensor to C x (R / D) x (R / D) for resolution R
//   stage NAME  later layers are billed to NAME
//   tap NAME    remember the current shape
//   from NAME   continue from a remembered shape (branches, skips)
//   reshape C H W
struct GraphEntry {
  enum class Type { layer, input, stage, tap, from, reshape } type = Type::layer;
  LayerSpec layer;
  std::string name;
  int c = 0, h = 0, w = 0;  // input: c and divisor in h; reshape: c, h, w
};

struct NetGraph {
  std::string name;
  std::vector<GraphEntry> entries;

  NetGraph& input(int channels, int divisor);
  NetGraph& stage(const std::string& name);
  NetGraph& tap(const std::string& name);
  NetGraph& from(const std::string& name);
  NetGraph& reshape(int c, int h, int w);
  NetGraph& add(const LayerSpec& layer);
  NetGraph& append(const NetGraph& other);
};

struct LayerProfile {
  std::string stage;
  LayerSpec layer;
  TensorShape input;
  TensorShape output;
  std::int64_t macs = 0;
};

struct StageProfile {
  std::string name;
  std::int64_t macs = 0;
};

struct ProfileReport {
  std::string graph;
  int resolution = 256;
  std::vector<StageProfile> stages;  // in order of first appearance
  std::vector<LayerProfile> layers;
  std::int64_t total = 0;

  double gmacs() const { return static_cast<double>(total) * 1e-9; }
};

ProfileReport profile(const NetGraph& graph, int resolution = 256);

// Table-style text: a "Module" header row over the stages and a
// "Cost (GMACs)" row, followed by the total.
std::string report_table(const ProfileReport& report);

// Catalog: resnet50, resnet50_mesh, efficientnet_b0, i2l_decoder_original,
// i2l_mesh_decoder, heatmap_aggregator, decoder_variant_A, decoder_variant_B,
// decoder_variant_C, i2l_original.
std::vector<std::string> catalog_names();
NetGraph catalog(const std::string& name);

// One entry per line; '#' starts a comment. Layers are
//   <kind> <k> <cin> <cout> <stride> <groups> [se_ratio | pool mode]
// and markers are written as in GraphEntry.
NetGraph parse_graph(const std::string& text, const std::string& name = "graph");
NetGraph load_graph(const std::filesystem::path& path);
std::string graph_to_text(const NetGraph& graph);

// Upsampling blocks on a C x S x S input with stride-2 depthwise deconvolution:
//   A: depthwise deconv + pointwise
//   B: depthwise deconv + squeeze-excitation + pointwise
//   C: depthwise deconv + squeeze-excitation
struct DecoderBlockCost {
  char variant = 'A';
  std::int64_t depthwise = 0;
  std::int64_t pointwise = 0;
  std::int64_t squeeze_excitation = 0;
  std::int64_t total = 0;
  double pointwise_share = 0.0;
};

struct DecoderComparison {
  int channels = 0;
  int spatial = 0;
  DecoderBlockCost a, b, c;
  bool ordered = false;  // C < A < B
};

DecoderComparison compare_decoders(int channels, int spatial, int kernel = 3, int se_ratio = 4);
std::string comparison_text(const DecoderComparison& comparison);

}  // namespace handkin
