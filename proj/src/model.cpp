#include "evlab/model.hpp"

#include <cmath>
#include <stdexcept>

namespace evlab {

KvConfig ModelConfig::to_config() const {
    KvConfig cfg;
    cfg.set_int("image_channels", image_channels);
    cfg.set_int("voxel_bins", voxel_bins);
    cfg.set_int("codec_hidden", codec_hidden);
    cfg.set_int("latent_channels", latent_channels);
    cfg.set_int("encoder_hidden_full", encoder_hidden_full);
    cfg.set_int("encoder_hidden_half", encoder_hidden_half);
    cfg.set_int("denoiser_hidden", denoiser_hidden);
    cfg.set_int("schedule_steps", schedule_steps);
    cfg.set("schedule_name", schedule_name);
    cfg.set_double("t_star_alpha_sq", t_star_alpha_sq);
    cfg.set_u64("init_seed", init_seed);
    return cfg;
}

ModelConfig ModelConfig::from_config(const KvConfig& cfg) {
    ModelConfig m;
    m.image_channels = static_cast<int>(cfg.get_int("image_channels", m.image_channels));
    m.voxel_bins = static_cast<int>(cfg.get_int("voxel_bins", m.voxel_bins));
    m.codec_hidden = static_cast<int>(cfg.get_int("codec_hidden", m.codec_hidden));
    m.latent_channels = static_cast<int>(cfg.get_int("latent_channels", m.latent_channels));
    m.encoder_hidden_full =
        static_cast<int>(cfg.get_int("encoder_hidden_full", m.encoder_hidden_full));
    m.encoder_hidden_half =
        static_cast<int>(cfg.get_int("encoder_hidden_half", m.encoder_hidden_half));
    m.denoiser_hidden = static_cast<int>(cfg.get_int("denoiser_hidden", m.denoiser_hidden));
    m.schedule_steps = static_cast<int>(cfg.get_int("schedule_steps", m.schedule_steps));
    m.schedule_name = cfg.get_str("schedule_name", m.schedule_name);
    m.t_star_alpha_sq = cfg.get_double("t_star_alpha_sq", m.t_star_alpha_sq);
    m.init_seed = cfg.get_u64("init_seed", m.init_seed);
    m.validate();
    return m;
}

void ModelConfig::validate() const {
    if (image_channels != 1 && image_channels != 3)
        throw std::invalid_argument("ModelConfig: image_channels must be 1 or 3");
    if (voxel_bins < 1) throw std::invalid_argument("ModelConfig: voxel_bins must be >= 1");
    if (codec_hidden < 1 || latent_channels < 1 || encoder_hidden_full < 1 ||
        encoder_hidden_half < 1 || denoiser_hidden < 1)
        throw std::invalid_argument("ModelConfig: channel counts must be positive");
    if (denoiser_hidden % 2 != 0)
        throw std::invalid_argument("ModelConfig: denoiser_hidden must be even");
    if (schedule_steps < 2) throw std::invalid_argument("ModelConfig: schedule_steps must be >= 2");
    if (schedule_name != "linear_alpha_bar")
        throw std::invalid_argument("ModelConfig: unknown schedule '" + schedule_name + "'");
    if (t_star_alpha_sq <= 0.0 || t_star_alpha_sq >= 1.0)
        throw std::invalid_argument("ModelConfig: t_star_alpha_sq must be in (0,1)");
}

DiffusionSchedule::DiffusionSchedule(std::vector<double> alphas, std::vector<double> betas,
                                     int t_star)
    : alphas_(std::move(alphas)), betas_(std::move(betas)), t_star_(t_star) {
    validate();
}

DiffusionSchedule DiffusionSchedule::linear_alpha_bar(int steps, double target_alpha_sq) {
    if (steps < 2) throw std::invalid_argument("DiffusionSchedule: steps must be >= 2");
    if (target_alpha_sq <= 0.0 || target_alpha_sq >= 1.0)
        throw std::invalid_argument("DiffusionSchedule: target_alpha_sq must be in (0,1)");
    std::vector<double> alphas(steps), betas(steps);
    int t_star = 0;
    double best = 2.0;
    for (int t = 0; t < steps; ++t) {
        const double abar = 1.0 - static_cast<double>(t) / (steps - 1);
        alphas[t] = std::sqrt(abar);
        betas[t] = std::sqrt(1.0 - abar);
        const double diff = std::fabs(abar - target_alpha_sq);
        if (diff < best) {
            best = diff;
            t_star = t;
        }
    }
    return DiffusionSchedule(std::move(alphas), std::move(betas), t_star);
}

void DiffusionSchedule::validate() const {
    if (alphas_.size() != betas_.size() || alphas_.empty())
        throw std::invalid_argument("DiffusionSchedule: malformed coefficient arrays");
    for (std::size_t t = 0; t < alphas_.size(); ++t) {
        const double s = alphas_[t] * alphas_[t] + betas_[t] * betas_[t];
        if (std::fabs(s - 1.0) > 1e-9)
            throw std::invalid_argument("DiffusionSchedule: alpha^2+beta^2 != 1 at t=" +
                                        std::to_string(t));
        if (t > 0 && alphas_[t] > alphas_[t - 1] + 1e-12)
            throw std::invalid_argument("DiffusionSchedule: alpha must be non-increasing");
    }
    if (t_star_ < 0 || t_star_ >= static_cast<int>(alphas_.size()))
        throw std::invalid_argument("DiffusionSchedule: t_star out of range");
    if (alphas_[t_star_] <= 0.0)
        throw std::invalid_argument("DiffusionSchedule: alpha at t_star must be positive");
}

EtfModule::EtfModule(int ch, const std::string& name, std::uint64_t seed)
    : conv_x(ch, ch, 3, name + ".conv_x", seed),
      conv_h(ch, ch, 3, name + ".conv_h", seed),
      conv_g(2 * ch, ch, 3, name + ".conv_g", seed),
      channels(ch) {}

EtfState EtfModule::initial_state(int h, int w) const {
    return EtfState{Tensor::zeros({channels, h, w})};
}

std::pair<Tensor, EtfState> EtfModule::forward(const Tensor& x, const EtfState& state) const {
    if (x.shape() != state.hidden.shape())
        throw std::invalid_argument("etf_forward: input " + shape_str(x.shape()) +
                                    " vs hidden " + shape_str(state.hidden.shape()));
    Tensor fx = conv_x(x);
    Tensor fh = conv_h(state.hidden);
    Tensor g = sigmoid(conv_g(concat_ch(fx, fh)));
    Tensor one_minus_g = add_scalar(scale(g, -1.0), 1.0);
    Tensor y = add(mul(g, x), mul(one_minus_g, state.hidden));
    return {y, EtfState{y}};
}

std::pair<Tensor, EtfState> etf_forward(const Tensor& x, const EtfState& state,
                                        const EtfModule& params) {
    return params.forward(x, state);
}

void EtfModule::collect(ParamList& out, const std::string& prefix) const {
    conv_x.collect(out, prefix + ".conv_x");
    conv_h.collect(out, prefix + ".conv_h");
    conv_g.collect(out, prefix + ".conv_g");
}

LatentCodec::LatentCodec(const ModelConfig& cfg, const std::string& name, std::uint64_t seed)
    : enc1(cfg.image_channels, cfg.codec_hidden, 3, name + ".enc1", seed),
      enc2(cfg.codec_hidden, cfg.codec_hidden, 3, name + ".enc2", seed),
      enc3(cfg.codec_hidden, 2 * cfg.latent_channels, 3, name + ".enc3", seed),
      dec1(cfg.latent_channels, cfg.codec_hidden, 3, name + ".dec1", seed),
      dec2(cfg.codec_hidden, cfg.codec_hidden, 3, name + ".dec2", seed),
      dec3(cfg.codec_hidden, cfg.image_channels, 3, name + ".dec3", seed),
      image_channels(cfg.image_channels), hidden(cfg.codec_hidden),
      latent_channels(cfg.latent_channels) {}

std::pair<Tensor, Tensor> LatentCodec::encode(const Tensor& x) const {
    Tensor h = relu(enc1(x));
    h = down2_nearest(h);
    h = relu(enc2(h));
    Tensor both = enc3(h);
    Tensor mean = slice_ch(both, 0, latent_channels);
    Tensor logvar = slice_ch(both, latent_channels, latent_channels);
    return {mean, logvar};
}

Tensor LatentCodec::decode(const Tensor& z) const {
    Tensor h = relu(dec1(z));
    h = relu(dec2(h));
    h = up2_bilinear(h);
    return sigmoid(dec3(h));
}

void LatentCodec::collect(ParamList& out, const std::string& prefix) const {
    collect_encoder(out, prefix);
    collect_decoder(out, prefix);
}

void LatentCodec::collect_encoder(ParamList& out, const std::string& prefix) const {
    enc1.collect(out, prefix + ".enc1");
    enc2.collect(out, prefix + ".enc2");
    enc3.collect(out, prefix + ".enc3");
}

void LatentCodec::collect_decoder(ParamList& out, const std::string& prefix) const {
    dec1.collect(out, prefix + ".dec1");
    dec2.collect(out, prefix + ".dec2");
    dec3.collect(out, prefix + ".dec3");
}

void LatentCodec::copy_values_from(const LatentCodec& other) {
    enc1.copy_values_from(other.enc1);
    enc2.copy_values_from(other.enc2);
    enc3.copy_values_from(other.enc3);
    dec1.copy_values_from(other.dec1);
    dec2.copy_values_from(other.dec2);
    dec3.copy_values_from(other.dec3);
}

EvEncoder::EvEncoder(const ModelConfig& cfg, const std::string& name, std::uint64_t seed)
    : stem(cfg.voxel_bins, cfg.encoder_hidden_full, 3, name + ".stem", seed),
      mid(cfg.encoder_hidden_full, cfg.encoder_hidden_half, 3, name + ".mid", seed),
      head(cfg.encoder_hidden_half, 2 * cfg.latent_channels, 3, name + ".head", seed),
      etf1(cfg.encoder_hidden_full, name + ".etf1", seed),
      etf2(cfg.encoder_hidden_half, name + ".etf2", seed),
      voxel_bins(cfg.voxel_bins), latent_channels(cfg.latent_channels) {}

EvEncoder::State EvEncoder::initial_state(int h, int w) const {
    if (h % 2 != 0 || w % 2 != 0)
        throw std::invalid_argument("EvEncoder: spatial dims must be even");
    return State{etf1.initial_state(h, w), etf2.initial_state(h / 2, w / 2)};
}

std::pair<std::pair<Tensor, Tensor>, EvEncoder::State> EvEncoder::step(
    const Tensor& voxel, const State& state) const {
    Tensor x = relu(stem(voxel));
    auto [y1, s1] = etf1.forward(x, state.s1);
    Tensor x2 = relu(mid(down2_nearest(y1)));
    auto [y2, s2] = etf2.forward(x2, state.s2);
    Tensor both = head(y2);
    Tensor mean = slice_ch(both, 0, latent_channels);
    Tensor logvar = slice_ch(both, latent_channels, latent_channels);
    return {{mean, logvar}, State{s1, s2}};
}

std::vector<std::pair<Tensor, Tensor>> EvEncoder::encode_sequence(
    const std::vector<VoxelGrid>& voxels) const {
    if (voxels.empty()) throw std::invalid_argument("ev_encode: empty sequence");
    State state = initial_state(voxels.front().h, voxels.front().w);
    std::vector<std::pair<Tensor, Tensor>> out;
    out.reserve(voxels.size());
    for (const VoxelGrid& v : voxels) {
        if (v.h != voxels.front().h || v.w != voxels.front().w ||
            v.t_bins != voxels.front().t_bins)
            throw std::invalid_argument("ev_encode: voxel grids differ in shape");
        auto [latent, next] = step(v.to_tensor(), state);
        out.push_back(latent);
        state = next;
    }
    return out;
}

void EvEncoder::collect(ParamList& out, const std::string& prefix) const {
    stem.collect(out, prefix + ".stem");
    etf1.collect(out, prefix + ".etf1");
    mid.collect(out, prefix + ".mid");
    etf2.collect(out, prefix + ".etf2");
    head.collect(out, prefix + ".head");
}

Tensor timestep_embedding(int t, int dim, int max_steps) {
    if (dim % 2 != 0) throw std::invalid_argument("timestep_embedding: dim must be even");
    std::vector<double> emb(dim);
    const int half = dim / 2;
    const double tt = static_cast<double>(t);
    for (int i = 0; i < half; ++i) {
        const double freq =
            std::exp(-std::log(static_cast<double>(max_steps)) * i / std::max(1, half - 1));
        emb[i] = std::sin(tt * freq);
        emb[half + i] = std::cos(tt * freq);
    }
    return Tensor::from_data({1, dim}, std::move(emb));
}

Denoiser::Denoiser(const ModelConfig& cfg, const std::string& name, std::uint64_t seed)
    : conv_in(cfg.latent_channels, cfg.denoiser_hidden, 3, name + ".conv_in", seed),
      conv_out(cfg.denoiser_hidden, cfg.latent_channels, 3, name + ".conv_out", seed),
      ra1(cfg.denoiser_hidden, cfg.denoiser_hidden, 3, name + ".ra1", seed),
      ra2(cfg.denoiser_hidden, cfg.denoiser_hidden, 3, name + ".ra2", seed),
      rb1(cfg.denoiser_hidden, cfg.denoiser_hidden, 3, name + ".rb1", seed),
      rb2(cfg.denoiser_hidden, cfg.denoiser_hidden, 3, name + ".rb2", seed),
      rc1(cfg.denoiser_hidden, cfg.denoiser_hidden, 3, name + ".rc1", seed),
      rc2(cfg.denoiser_hidden, cfg.denoiser_hidden, 3, name + ".rc2", seed),
      rd1(cfg.denoiser_hidden, cfg.denoiser_hidden, 3, name + ".rd1", seed),
      rd2(cfg.denoiser_hidden, cfg.denoiser_hidden, 3, name + ".rd2", seed),
      t_proj(cfg.denoiser_hidden, cfg.denoiser_hidden, name + ".t_proj", seed),
      hidden(cfg.denoiser_hidden), latent_channels(cfg.latent_channels) {}

namespace {

Tensor res_block(const Tensor& x, const Conv2dLayer& c1, const Conv2dLayer& c2) {
    return add(x, c2(relu(c1(x))));
}

} // namespace

Tensor Denoiser::forward(const Tensor& z, int t_index, int schedule_steps) const {
    Tensor emb = timestep_embedding(t_index, hidden, schedule_steps);
    Tensor temb = reshape(t_proj(emb), {hidden});

    Tensor h0 = conv_in(z);
    h0 = add(h0, broadcast_chw(temb, z.shape()[1], z.shape()[2]));
    Tensor h1 = res_block(h0, ra1, ra2);
    Tensor d = down2_nearest(h1);
    d = res_block(d, rb1, rb2);
    d = res_block(d, rc1, rc2);
    Tensor u = up2_bilinear(d);
    Tensor h2 = res_block(add(u, h1), rd1, rd2);
    return conv_out(h2);
}

void Denoiser::collect(ParamList& out, const std::string& prefix) const {
    conv_in.collect(out, prefix + ".conv_in");
    ra1.collect(out, prefix + ".ra1");
    ra2.collect(out, prefix + ".ra2");
    rb1.collect(out, prefix + ".rb1");
    rb2.collect(out, prefix + ".rb2");
    rc1.collect(out, prefix + ".rc1");
    rc2.collect(out, prefix + ".rc2");
    rd1.collect(out, prefix + ".rd1");
    rd2.collect(out, prefix + ".rd2");
    conv_out.collect(out, prefix + ".conv_out");
    t_proj.collect(out, prefix + ".t_proj");
}

Tensor os_diff(const Tensor& z, const DiffusionSchedule& schedule, const EpsFn& eps) {
    return os_diff(z, schedule, eps, schedule.t_star());
}

Tensor os_diff(const Tensor& z, const DiffusionSchedule& schedule, const EpsFn& eps,
               int t_index) {
    const double a = schedule.alpha(t_index);
    const double b = schedule.beta(t_index);
    if (a <= 0.0)
        throw std::invalid_argument("os_diff: alpha at t=" + std::to_string(t_index) +
                                    " must be positive");
    Tensor noise = eps(z, t_index);
    return scale(sub(z, scale(noise, b)), 1.0 / a);
}

EvDiffModel::EvDiffModel(const ModelConfig& cfg_)
    : cfg(cfg_), codec(cfg_, "codec", cfg_.init_seed),
      encoder(cfg_, "student", mix_seed(cfg_.init_seed, 2)),
      denoiser(cfg_, "denoiser", mix_seed(cfg_.init_seed, 3)),
      schedule(DiffusionSchedule::linear_alpha_bar(cfg_.schedule_steps, cfg_.t_star_alpha_sq)) {
    cfg.validate();
}

ParamList EvDiffModel::inference_params() {
    ParamList out;
    codec.collect(out, "codec");
    encoder.collect(out, "student");
    denoiser.collect(out, "denoiser");
    return out;
}

std::vector<Image> EvDiffModel::reconstruct(const EventStream& stream,
                                            std::uint64_t window_dt) const {
    if (window_dt == 0) throw std::invalid_argument("reconstruct: window_dt must be positive");
    std::vector<Image> frames;
    if (stream.empty()) return frames;

    NoGradScope inference;
    const std::uint64_t t0 = stream.t_first();
    const std::uint64_t n_windows = (stream.t_last() - t0) / window_dt + 1;
    EvEncoder::State state = encoder.initial_state(stream.height, stream.width);
    const EpsFn eps = [this](const Tensor& zz, int t) {
        return denoiser.forward(zz, t, schedule.steps());
    };
    for (std::uint64_t k = 0; k < n_windows; ++k) {
        const std::uint64_t ws = t0 + k * window_dt;
        const EventStream win = window(stream, ws, window_dt);
        const VoxelGrid grid = to_voxel_grid(win, cfg.voxel_bins, ws, ws + window_dt);
        auto [latent, next] = encoder.step(grid.to_tensor(), state);
        state = next;
        Tensor z_hat = os_diff(latent.first, schedule, eps);
        frames.push_back(tensor_to_image(codec.decode(z_hat)));
    }
    return frames;
}

} // namespace evlab
