#include "handkin/profiler.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "handkin/error.hpp"

namespace handkin {

namespace {

constexpr std::array<const char*, 9> kKindNames = {
    "conv",    "deconv",          "depthwise_conv",     "depthwise_deconv", "pointwise",
    "fully_connected", "squeeze_excitation", "pool", "elementwise"};

constexpr std::array<const char*, 4> kPoolModes = {"window", "global", "rows", "cols"};

int ceil_div(int a, int b) { return (a + b - 1) / b; }

bool is_conv_like(LayerKind k) {
  return k == LayerKind::conv || k == LayerKind::deconv || k == LayerKind::depthwise_conv ||
         k == LayerKind::depthwise_deconv || k == LayerKind::pointwise;
}

bool is_deconv(LayerKind k) { return k == LayerKind::deconv || k == LayerKind::depthwise_deconv; }

std::string shape_text(const TensorShape& s) {
  return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

// Catalog helpers.
LayerSpec conv(int k, int cin, int cout, int s = 1) {
  return {LayerKind::conv, k, cin, cout, s, 1, 4, PoolMode::window};
}
LayerSpec deconv(int k, int cin, int cout, int s) {
  return {LayerKind::deconv, k, cin, cout, s, 1, 4, PoolMode::window};
}
LayerSpec pointwise(int cin, int cout) {
  return {LayerKind::pointwise, 1, cin, cout, 1, 1, 4, PoolMode::window};
}
LayerSpec dw_conv(int k, int c, int s) {
  return {LayerKind::depthwise_conv, k, c, c, s, c, 4, PoolMode::window};
}
LayerSpec dw_deconv(int k, int c, int s) {
  return {LayerKind::depthwise_deconv, k, c, c, s, c, 4, PoolMode::window};
}
LayerSpec fc(int in, int out) {
  return {LayerKind::fully_connected, 1, in, out, 1, 1, 4, PoolMode::window};
}
LayerSpec se(int c, int r) {
  return {LayerKind::squeeze_excitation, 1, c, c, 1, 1, r, PoolMode::window};
}
LayerSpec pool(int c, PoolMode mode, int k = 1, int s = 1) {
  return {LayerKind::pool, k, c, c, s, 1, 4, mode};
}
LayerSpec add(int c) { return {LayerKind::elementwise, 1, c, c, 1, 1, 4, PoolMode::window}; }

void bottleneck(NetGraph& g, int cin, int width, int cout, int stride) {
  g.tap("block_in");
  g.add(conv(1, cin, width)).add(conv(3, width, width, stride)).add(conv(1, width, cout));
  if (stride != 1 || cin != cout) g.from("block_in").add(conv(1, cin, cout, stride));
  g.add(add(cout));
}

// ResNet-50 feature extractor without the classifier. With stem = false it
// starts from the 64-channel stride-4 features.
void resnet50_body(NetGraph& g, bool stem, const std::string& single_stage) {
  auto stage = [&](const std::string& s) { g.stage(single_stage.empty() ? s : single_stage); };
  if (stem) {
    g.input(3, 1);
    stage("stem");
    g.add(conv(7, 3, 64, 2)).add(pool(64, PoolMode::window, 3, 2));
  } else {
    g.input(64, 4);
  }
  struct Layer { int blocks, width, out, stride; };
  const std::array<Layer, 4> layers = {{{3, 64, 256, 1}, {4, 128, 512, 2}, {6, 256, 1024, 2}, {3, 512, 2048, 2}}};
  int c = 64;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    stage("layer" + std::to_string(i + 1));
    for (int b = 0; b < layers[i].blocks; ++b) {
      bottleneck(g, c, layers[i].width, layers[i].out, b == 0 ? layers[i].stride : 1);
      c = layers[i].out;
    }
  }
}

void mbconv(NetGraph& g, int cin, int cout, int expand, int k, int stride) {
  const int c = cin * expand;
  g.tap("block_in");
  if (expand != 1) g.add(conv(1, cin, c));
  // Squeeze width is a quarter of the block input channels.
  g.add(dw_conv(k, c, stride)).add(se(c, 4 * expand)).add(conv(1, c, cout));
  if (stride == 1 && cin == cout) g.add(add(cout));
}

NetGraph efficientnet_b0() {
  NetGraph g;
  g.name = "efficientnet_b0";
  g.input(3, 1).stage("stem").add(conv(3, 3, 32, 2));
  struct Stage { int expand, k, stride, out, repeats; };
  const std::array<Stage, 7> stages = {{{1, 3, 1, 16, 1},
                                        {6, 3, 2, 24, 2},
                                        {6, 5, 2, 40, 2},
                                        {6, 3, 2, 80, 3},
                                        {6, 5, 1, 112, 3},
                                        {6, 5, 2, 192, 4},
                                        {6, 3, 1, 320, 1}}};
  int c = 32;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    g.stage("stage" + std::to_string(i + 1));
    for (int r = 0; r < stages[i].repeats; ++r) {
      mbconv(g, c, stages[i].out, stages[i].expand, stages[i].k, r == 0 ? stages[i].stride : 1);
      c = stages[i].out;
    }
  }
  g.stage("head").add(conv(1, 320, 1280));
  return g;
}

// Three stride-2 deconvolutions to 64 x 64, then 1D heatmaps: x and y by
// pooling the upsampled map, z from the pooled backbone vector through a
// fully connected layer.
NetGraph i2l_decoder(const std::string& name, const std::string& stage, int outputs) {
  constexpr int kLixels = 64;
  constexpr int kWidth = 256;
  NetGraph g;
  g.name = name;
  g.input(2048, 32).stage(stage).tap("backbone");
  g.add(deconv(4, 2048, kWidth, 2)).add(deconv(4, kWidth, kWidth, 2)).add(deconv(4, kWidth, kWidth, 2));
  g.tap("upsampled");
  g.add(pool(kWidth, PoolMode::rows)).add(conv(1, kWidth, outputs));
  g.from("upsampled").add(pool(kWidth, PoolMode::cols)).add(conv(1, kWidth, outputs));
  g.from("backbone").add(pool(2048, PoolMode::global)).add(fc(2048, kWidth * kLixels));
  g.reshape(kWidth, kLixels, 1).add(conv(1, kWidth, outputs));
  return g;
}

NetGraph heatmap_aggregator(const std::string& stage = "heatmap_aggregation") {
  // Early 64-channel features concatenated with 21 joints x 64 depth lixels.
  NetGraph g;
  g.name = "heatmap_aggregator";
  g.input(64 + 21 * 64, 4).stage(stage).add(conv(3, 64 + 21 * 64, 64));
  return g;
}

NetGraph decoder_variant(char v) {
  constexpr int kWidth = 256;
  constexpr int kKernel = 3;
  NetGraph g;
  g.name = std::string("decoder_variant_") + v;
  g.input(1280, 32).stage("decoder").add(pointwise(1280, kWidth));
  for (int b = 0; b < 3; ++b) {
    g.add(dw_deconv(kKernel, kWidth, 2));
    if (v != 'A') g.add(se(kWidth, 4));
    if (v != 'C') g.add(pointwise(kWidth, kWidth));
  }
  return g;
}

}  // namespace

std::string to_string(LayerKind kind) { return kKindNames[static_cast<int>(kind)]; }

LayerKind layer_kind_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (s == kKindNames[i]) return static_cast<LayerKind>(i);
  throw ParseError("unknown layer kind '" + s + "'");
}

void LayerSpec::validate() const {
  if (kernel < 1 || in_channels < 1 || out_channels < 1 || stride < 1 || groups < 1)
    throw ShapeError("layer sizes must be >= 1");
  if (in_channels % groups != 0 || out_channels % groups != 0)
    throw ShapeError("groups must divide the channel counts");
  switch (kind) {
    case LayerKind::depthwise_conv:
    case LayerKind::depthwise_deconv:
      if (groups != in_channels) throw ShapeError("depthwise layers need groups == in_channels");
      break;
    case LayerKind::pointwise:
      if (kernel != 1) throw ShapeError("pointwise layers have kernel 1");
      break;
    case LayerKind::squeeze_excitation:
      if (se_ratio < 1) throw ShapeError("SE ratio must be >= 1");
      [[fallthrough]];
    case LayerKind::pool:
    case LayerKind::elementwise:
      if (in_channels != out_channels) throw ShapeError(to_string(kind) + " keeps the channel count");
      break;
    default:
      break;
  }
}

TensorShape layer_output(const LayerSpec& l, const TensorShape& in) {
  l.validate();
  if (in.c < 1 || in.h < 1 || in.w < 1) throw ShapeError("empty input tensor");
  if (l.kind == LayerKind::fully_connected) {
    const long long n = static_cast<long long>(in.c) * in.h * in.w;
    if (n != l.in_channels)
      throw ShapeError("fully connected layer expects " + std::to_string(l.in_channels) +
                       " inputs, got " + shape_text(in));
    return {l.out_channels, 1, 1};
  }
  if (in.c != l.in_channels)
    throw ShapeError(to_string(l.kind) + " expects " + std::to_string(l.in_channels) +
                     " channels, got " + shape_text(in));
  if (is_conv_like(l.kind)) {
    if (is_deconv(l.kind)) return {l.out_channels, in.h * l.stride, in.w * l.stride};
    return {l.out_channels, ceil_div(in.h, l.stride), ceil_div(in.w, l.stride)};
  }
  if (l.kind == LayerKind::pool) {
    switch (l.pool_mode) {
      case PoolMode::global: return {in.c, 1, 1};
      case PoolMode::rows: return {in.c, 1, in.w};
      case PoolMode::cols: return {in.c, in.h, 1};
      case PoolMode::window: return {in.c, ceil_div(in.h, l.stride), ceil_div(in.w, l.stride)};
    }
  }
  return in;
}

std::int64_t layer_macs(const LayerSpec& l, int in_h, int in_w) {
  const bool flat_input = l.kind == LayerKind::fully_connected;
  const TensorShape in{l.in_channels, flat_input ? 1 : in_h, flat_input ? 1 : in_w};
  const TensorShape out = layer_output(l, in);
  const auto k2 = static_cast<std::int64_t>(l.kernel) * l.kernel;
  switch (l.kind) {
    case LayerKind::fully_connected:
      return static_cast<std::int64_t>(l.in_channels) * l.out_channels;
    case LayerKind::squeeze_excitation: {
      const std::int64_t c = l.in_channels;
      const std::int64_t hidden = std::max<std::int64_t>(1, c / l.se_ratio);
      return 2 * c * hidden + c * in_h * in_w;
    }
    case LayerKind::pool:
    case LayerKind::elementwise:
      return 0;
    default:
      return k2 * (l.in_channels / l.groups) * l.out_channels * static_cast<std::int64_t>(out.h) * out.w;
  }
}

NetGraph& NetGraph::input(int channels, int divisor) {
  GraphEntry e;
  e.type = GraphEntry::Type::input;
  e.c = channels;
  e.h = divisor;
  entries.push_back(e);
  return *this;
}

NetGraph& NetGraph::stage(const std::string& n) {
  GraphEntry e;
  e.type = GraphEntry::Type::stage;
  e.name = n;
  entries.push_back(e);
  return *this;
}

NetGraph& NetGraph::tap(const std::string& n) {
  GraphEntry e;
  e.type = GraphEntry::Type::tap;
  e.name = n;
  entries.push_back(e);
  return *this;
}

NetGraph& NetGraph::from(const std::string& n) {
  GraphEntry e;
  e.type = GraphEntry::Type::from;
  e.name = n;
  entries.push_back(e);
  return *this;
}

NetGraph& NetGraph::reshape(int c, int h, int w) {
  GraphEntry e;
  e.type = GraphEntry::Type::reshape;
  e.c = c;
  e.h = h;
  e.w = w;
  entries.push_back(e);
  return *this;
}

NetGraph& NetGraph::add(const LayerSpec& layer) {
  GraphEntry e;
  e.layer = layer;
  entries.push_back(e);
  return *this;
}

NetGraph& NetGraph::append(const NetGraph& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
  return *this;
}

ProfileReport profile(const NetGraph& g, int resolution) {
  if (resolution < 1) throw DomainError("resolution must be >= 1");
  ProfileReport r;
  r.graph = g.name;
  r.resolution = resolution;
  TensorShape cur;
  bool have_input = false;
  std::string stage = "main";
  std::map<std::string, TensorShape> taps;
  auto bill = [&](const std::string& s, std::int64_t macs) {
    auto it = std::find_if(r.stages.begin(), r.stages.end(), [&](auto& x) { return x.name == s; });
    if (it == r.stages.end()) r.stages.push_back({s, macs});
    else it->macs += macs;
  };
  for (std::size_t i = 0; i < g.entries.size(); ++i) {
    const GraphEntry& e = g.entries[i];
    const std::string where = "entry " + std::to_string(i + 1) + " of '" + g.name + "': ";
    switch (e.type) {
      case GraphEntry::Type::input:
        if (e.c < 1 || e.h < 1 || resolution % e.h != 0)
          throw ShapeError(where + "resolution " + std::to_string(resolution) +
                           " is not divisible by the input divisor");
        cur = {e.c, resolution / e.h, resolution / e.h};
        have_input = true;
        break;
      case GraphEntry::Type::stage:
        stage = e.name;
        bill(stage, 0);
        break;
      case GraphEntry::Type::tap:
        taps[e.name] = cur;
        break;
      case GraphEntry::Type::from: {
        auto it = taps.find(e.name);
        if (it == taps.end()) throw ShapeError(where + "unknown tap '" + e.name + "'");
        cur = it->second;
        break;
      }
      case GraphEntry::Type::reshape:
        if (static_cast<long long>(e.c) * e.h * e.w != static_cast<long long>(cur.c) * cur.h * cur.w)
          throw ShapeError(where + "cannot reshape " + shape_text(cur) + " to " +
                           shape_text({e.c, e.h, e.w}));
        cur = {e.c, e.h, e.w};
        break;
      case GraphEntry::Type::layer: {
        if (!have_input) throw ShapeError(where + "layer before any input marker");
        LayerProfile lp;
        lp.stage = stage;
        lp.layer = e.layer;
        lp.input = cur;
        try {
          lp.output = layer_output(e.layer, cur);
          lp.macs = e.layer.kind == LayerKind::fully_connected ? layer_macs(e.layer, 1, 1)
                                                               : layer_macs(e.layer, cur.h, cur.w);
        } catch (const ShapeError& err) {
          throw ShapeError(where + err.what());
        }
        cur = lp.output;
        r.total += lp.macs;
        bill(stage, lp.macs);
        r.layers.push_back(lp);
        break;
      }
    }
  }
  return r;
}

std::string report_table(const ProfileReport& r) {
  auto gm = [](std::int64_t macs) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(macs) * 1e-9);
    return std::string(buf);
  };
  const std::string first_col = "Cost (GMACs)";
  std::vector<std::string> heads{"Module"}, cells{first_col};
  for (const auto& s : r.stages) {
    heads.push_back(s.name);
    cells.push_back(gm(s.macs));
  }
  heads.emplace_back("Total");
  cells.push_back(gm(r.total));
  std::ostringstream os;
  os << "# " << r.graph << " @ " << r.resolution << "x" << r.resolution << '\n';
  for (const auto* row : {&heads, &cells}) {
    for (std::size_t i = 0; i < heads.size(); ++i) {
      const std::size_t width = std::max(heads[i].size(), cells[i].size()) + 2;
      std::string cell = (*row)[i];
      cell.resize(i + 1 == heads.size() ? cell.size() : width, ' ');
      os << cell;
    }
    os << '\n';
  }
  os << "total_macs " << r.total << '\n';
  return os.str();
}

std::vector<std::string> catalog_names() {
  return {"resnet50",           "resnet50_mesh",     "efficientnet_b0",   "i2l_decoder_original",
          "i2l_mesh_decoder",   "heatmap_aggregator", "decoder_variant_A", "decoder_variant_B",
          "decoder_variant_C",  "i2l_original"};
}

NetGraph catalog(const std::string& name) {
  NetGraph g;
  g.name = name;
  if (name == "resnet50") {
    resnet50_body(g, true, "");
  } else if (name == "resnet50_mesh") {
    resnet50_body(g, false, "");
  } else if (name == "efficientnet_b0") {
    g = efficientnet_b0();
  } else if (name == "i2l_decoder_original") {
    g = i2l_decoder(name, "pose_decoder", 21);
  } else if (name == "i2l_mesh_decoder") {
    g = i2l_decoder(name, "mesh_decoder", 778);
  } else if (name == "heatmap_aggregator") {
    g = heatmap_aggregator();
  } else if (name == "decoder_variant_A" || name == "decoder_variant_B" ||
             name == "decoder_variant_C") {
    g = decoder_variant(name.back());
  } else if (name == "i2l_original") {
    resnet50_body(g, true, "pose_backbone");
    g.append(i2l_decoder("", "pose_decoder", 21));
    g.append(heatmap_aggregator("heatmap_aggregation"));
    NetGraph mesh;
    resnet50_body(mesh, false, "mesh_backbone");
    g.append(mesh);
    g.append(i2l_decoder("", "mesh_decoder", 778));
  } else {
    std::string known;
    for (const auto& n : catalog_names()) known += " " + n;
    throw ParseError("unknown graph '" + name + "' (catalog:" + known + ")");
  }
  g.name = name;
  return g;
}

NetGraph parse_graph(const std::string& text, const std::string& name) {
  NetGraph g;
  g.name = name;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    const std::string where = "graph line " + std::to_string(line_no) + ": ";
    std::string extra;
    auto done = [&] {
      if (ls >> extra) throw ParseError(where + "unexpected '" + extra + "'");
    };
    if (word == "stage" || word == "tap" || word == "from") {
      std::string n;
      if (!(ls >> n)) throw ParseError(where + "expected a name after '" + word + "'");
      done();
      if (word == "stage") g.stage(n);
      else if (word == "tap") g.tap(n);
      else g.from(n);
    } else if (word == "input") {
      int c = 0, d = 0;
      if (!(ls >> c >> d)) throw ParseError(where + "expected 'input <channels> <divisor>'");
      done();
      g.input(c, d);
    } else if (word == "reshape") {
      int c = 0, h = 0, w = 0;
      if (!(ls >> c >> h >> w)) throw ParseError(where + "expected 'reshape <c> <h> <w>'");
      done();
      g.reshape(c, h, w);
    } else {
      LayerSpec l;
      try {
        l.kind = layer_kind_from_string(word);
      } catch (const ParseError& e) {
        throw ParseError(where + e.what());
      }
      if (!(ls >> l.kernel >> l.in_channels >> l.out_channels >> l.stride >> l.groups))
        throw ParseError(where + "expected '<kind> <k> <cin> <cout> <stride> <groups>'");
      if (ls >> extra) {
        if (l.kind == LayerKind::squeeze_excitation) {
          try {
            l.se_ratio = std::stoi(extra);
          } catch (const std::logic_error&) {
            throw ParseError(where + "bad SE ratio '" + extra + "'");
          }
        } else if (l.kind == LayerKind::pool) {
          auto it = std::find(kPoolModes.begin(), kPoolModes.end(), extra);
          if (it == kPoolModes.end()) throw ParseError(where + "unknown pool mode '" + extra + "'");
          l.pool_mode = static_cast<PoolMode>(it - kPoolModes.begin());
        } else {
          throw ParseError(where + "unexpected '" + extra + "'");
        }
        done();
      }
      try {
        l.validate();
      } catch (const ShapeError& e) {
        throw ShapeError(where + e.what());
      }
      g.add(l);
    }
  }
  return g;
}

NetGraph load_graph(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open graph file '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_graph(ss.str(), path.stem().string());
}

std::string graph_to_text(const NetGraph& g) {
  std::ostringstream os;
  os << "# " << g.name << '\n';
  for (const auto& e : g.entries) {
    switch (e.type) {
      case GraphEntry::Type::input: os << "input " << e.c << ' ' << e.h << '\n'; break;
      case GraphEntry::Type::stage: os << "stage " << e.name << '\n'; break;
      case GraphEntry::Type::tap: os << "tap " << e.name << '\n'; break;
      case GraphEntry::Type::from: os << "from " << e.name << '\n'; break;
      case GraphEntry::Type::reshape: os << "reshape " << e.c << ' ' << e.h << ' ' << e.w << '\n'; break;
      case GraphEntry::Type::layer: {
        const LayerSpec& l = e.layer;
        os << to_string(l.kind) << ' ' << l.kernel << ' ' << l.in_channels << ' ' << l.out_channels
           << ' ' << l.stride << ' ' << l.groups;
        if (l.kind == LayerKind::squeeze_excitation) os << ' ' << l.se_ratio;
        if (l.kind == LayerKind::pool) os << ' ' << kPoolModes[static_cast<int>(l.pool_mode)];
        os << '\n';
        break;
      }
    }
  }
  return os.str();
}

DecoderComparison compare_decoders(int channels, int spatial, int kernel, int se_ratio) {
  if (channels < 1 || spatial < 1 || kernel < 1 || se_ratio < 1)
    throw DomainError("decoder comparison sizes must be >= 1");
  const LayerSpec dw = dw_deconv(kernel, channels, 2);
  const LayerSpec pw = pointwise(channels, channels);
  const LayerSpec sq = se(channels, se_ratio);
  const int up = 2 * spatial;
  const std::int64_t m_dw = layer_macs(dw, spatial, spatial);
  const std::int64_t m_pw = layer_macs(pw, up, up);
  const std::int64_t m_se = layer_macs(sq, up, up);
  auto block = [&](char v, bool with_se, bool with_pw) {
    DecoderBlockCost b;
    b.variant = v;
    b.depthwise = m_dw;
    b.squeeze_excitation = with_se ? m_se : 0;
    b.pointwise = with_pw ? m_pw : 0;
    b.total = b.depthwise + b.squeeze_excitation + b.pointwise;
    b.pointwise_share = static_cast<double>(b.pointwise) / static_cast<double>(b.total);
    return b;
  };
  DecoderComparison c;
  c.channels = channels;
  c.spatial = spatial;
  c.a = block('A', false, true);
  c.b = block('B', true, true);
  c.c = block('C', true, false);
  c.ordered = c.c.total < c.a.total && c.a.total < c.b.total;
  return c;
}

std::string comparison_text(const DecoderComparison& c) {
  std::ostringstream os;
  os << "channels " << c.channels << " spatial " << c.spatial << '\n';
  os << "variant depthwise squeeze_excitation pointwise total pointwise_share\n";
  for (const auto* b : {&c.a, &c.b, &c.c}) {
    char share[32];
    std::snprintf(share, sizeof share, "%.4f", b->pointwise_share);
    os << b->variant << ' ' << b->depthwise << ' ' << b->squeeze_excitation << ' ' << b->pointwise
       << ' ' << b->total << ' ' << share << '\n';
  }
  os << "ordering_C<A<B " << (c.ordered ? "yes" : "no") << '\n';
  return os.str();
}

}  // namespace handkin
