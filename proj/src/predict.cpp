#include "hota/predict.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include "json.hpp"

#include "hota/error.hpp"

namespace hota {

namespace fs = std::filesystem;

std::string to_string(PredictorKind kind) {
    switch (kind) {
        case PredictorKind::Ndwi: return "ndwi";
        case PredictorKind::NdwiContext: return "ndwi_context";
        case PredictorKind::Constant: return "constant";
        case PredictorKind::External: return "external";
    }
    return "unknown";
}

PredictorKind parse_predictor_kind(const std::string& text) {
    if (text == "ndwi") return PredictorKind::Ndwi;
    if (text == "ndwi_context") return PredictorKind::NdwiContext;
    if (text == "constant") return PredictorKind::Constant;
    if (text == "external") return PredictorKind::External;
    throw ValidationError("unknown predictor kind \"" + text + "\"");
}

void PredictorConfig::validate() const {
    switch (kind) {
        case PredictorKind::NdwiContext:
            if (!(context_fraction > 0.0 && context_fraction <= 1.0)) {
                throw ValidationError("context_fraction must lie in (0, 1]");
            }
            [[fallthrough]];
        case PredictorKind::Ndwi:
            if (!(ndwi_sharpness > 0.0) || !std::isfinite(ndwi_sharpness)) {
                throw ValidationError("ndwi sharpness must be positive");
            }
            if (!std::isfinite(ndwi_threshold)) throw ValidationError("ndwi threshold must be finite");
            break;
        case PredictorKind::Constant:
            if (!(constant_value >= 0.0 && constant_value <= 1.0)) {
                throw ValidationError("constant predictor value must lie in [0, 1]");
            }
            break;
        case PredictorKind::External:
            if (external_command.empty()) throw ValidationError("external predictor needs a command");
            if (exchange_dir.empty()) throw ValidationError("external predictor needs an exchange directory");
            if (batch_size <= 0) throw ValidationError("batch size must be positive");
            if (!(timeout_seconds > 0.0)) throw ValidationError("timeout must be positive");
            break;
    }
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

TilePrediction empty_prediction(const TilePatch& patch) {
    TilePrediction pred;
    pred.tile = patch.tile;
    pred.rows = patch.rows;
    pred.cols = patch.cols;
    pred.probs.assign(patch.pixel_count(), 0.5);
    pred.valid = patch.valid;
    return pred;
}

std::pair<std::size_t, std::size_t> ndwi_bands(const TilePatch& patch) {
    auto green = patch.band_index(kGreenBand);
    auto nir = patch.band_index(kNirBand);
    if (!green) throw ValidationError(std::string("missing required band ") + kGreenBand);
    if (!nir) throw ValidationError(std::string("missing required band ") + kNirBand);
    return {*green, *nir};
}

double ndwi_at(const TilePatch& patch, std::size_t green, std::size_t nir, std::size_t p) {
    const double g = patch.value(green, p);
    const double n = patch.value(nir, p);
    const double denom = g + n;
    return denom == 0.0 ? 0.0 : (g - n) / denom;
}

}  // namespace

TilePrediction predict_ndwi(const TilePatch& patch, const PredictorConfig& cfg) {
    const auto [green, nir] = ndwi_bands(patch);
    TilePrediction pred = empty_prediction(patch);
    for (std::size_t p = 0; p < patch.pixel_count(); ++p) {
        if (!patch.valid[p]) continue;
        pred.probs[p] = logistic(cfg.ndwi_sharpness * (ndwi_at(patch, green, nir, p) - cfg.ndwi_threshold));
    }
    return pred;
}

TilePrediction predict_ndwi_context(const TilePatch& patch, const PredictorConfig& cfg) {
    const auto [green, nir] = ndwi_bands(patch);
    TilePrediction pred = empty_prediction(patch);
    const int rows = patch.rows, cols = patch.cols;
    const int extent = std::max(patch.tile.size, std::max(rows, cols));
    const int radius = std::max(1, static_cast<int>(std::lround(cfg.context_fraction * extent)));

    // Summed-area tables of NDWI and valid count.
    const std::size_t stride = static_cast<std::size_t>(cols) + 1;
    std::vector<double> sum((static_cast<std::size_t>(rows) + 1) * stride, 0.0);
    std::vector<long long> cnt(sum.size(), 0);
    for (int r = 0; r < rows; ++r) {
        double row_sum = 0.0;
        long long row_cnt = 0;
        for (int c = 0; c < cols; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * cols + c;
            if (patch.valid[p]) {
                row_sum += ndwi_at(patch, green, nir, p);
                ++row_cnt;
            }
            const std::size_t i = (static_cast<std::size_t>(r) + 1) * stride + c + 1;
            sum[i] = sum[i - stride] + row_sum;
            cnt[i] = cnt[i - stride] + row_cnt;
        }
    }
    auto box = [&](const auto& table, int r0, int c0, int r1, int c1) {
        return table[static_cast<std::size_t>(r1) * stride + c1] - table[static_cast<std::size_t>(r0) * stride + c1] -
               table[static_cast<std::size_t>(r1) * stride + c0] + table[static_cast<std::size_t>(r0) * stride + c0];
    };

    for (int r = 0; r < rows; ++r) {
        const int r0 = std::max(0, r - radius), r1 = std::min(rows, r + radius + 1);
        for (int c = 0; c < cols; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * cols + c;
            if (!patch.valid[p]) continue;
            const int c0 = std::max(0, c - radius), c1 = std::min(cols, c + radius + 1);
            const long long n = box(cnt, r0, c0, r1, c1);
            const double mean = box(sum, r0, c0, r1, c1) / static_cast<double>(n);
            pred.probs[p] = logistic(cfg.ndwi_sharpness * (mean - cfg.ndwi_threshold));
        }
    }
    return pred;
}

TilePrediction predict_constant(const TilePatch& patch, const PredictorConfig& cfg) {
    if (!(cfg.constant_value >= 0.0 && cfg.constant_value <= 1.0)) {
        throw ValidationError("constant predictor value must lie in [0, 1]");
    }
    TilePrediction pred = empty_prediction(patch);
    std::fill(pred.probs.begin(), pred.probs.end(), cfg.constant_value);
    return pred;
}

TilePrediction predict_builtin(const TilePatch& patch, const PredictorConfig& cfg) {
    switch (cfg.kind) {
        case PredictorKind::Ndwi: return predict_ndwi(patch, cfg);
        case PredictorKind::NdwiContext: return predict_ndwi_context(patch, cfg);
        case PredictorKind::Constant: return predict_constant(patch, cfg);
        case PredictorKind::External: break;
    }
    throw ValidationError("external predictor cannot run per tile in-process");
}

// ---------------------------------------------------------------------------
// External exchange protocol

namespace exchange {

std::string tile_file_name(std::size_t id) { return "tile_" + std::to_string(id) + ".bin"; }
std::string prob_file_name(std::size_t id) { return "prob_" + std::to_string(id) + ".bin"; }

void write_batch(const fs::path& dir, const std::vector<const TilePatch*>& batch, std::size_t first_id) {
    nlohmann::ordered_json manifest;
    manifest["dtype"] = "f32";
    manifest["band_names"] = batch.empty() ? std::vector<std::string>{} : batch.front()->band_names;
    manifest["tiles"] = nlohmann::ordered_json::array();
    std::vector<float> buffer;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const TilePatch& patch = *batch[k];
        if (patch.rows != patch.cols) throw ValidationError("exchange protocol requires square tiles");
        const std::size_t id = first_id + k;
        buffer.assign(patch.values.begin(), patch.values.end());
        write_f32_le(dir / tile_file_name(id), buffer);
        manifest["tiles"].push_back({{"id", id},
                                     {"size", patch.rows},
                                     {"bands", patch.band_count()},
                                     {"file", tile_file_name(id)},
                                     {"row0", patch.tile.row0},
                                     {"col0", patch.tile.col0},
                                     {"scale_id", patch.tile.scale_id}});
    }
    std::ofstream out(dir / kManifestName, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write exchange manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

std::vector<float> read_tile(const fs::path& dir, std::size_t id, int bands, int size) {
    return read_f32_le(dir / tile_file_name(id),
                       static_cast<std::size_t>(bands) * static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
}

std::vector<double> read_probs(const fs::path& dir, std::size_t id, int size) {
    const fs::path path = dir / prob_file_name(id);
    if (!fs::exists(path)) throw ComputationError("external predictor produced no output for tile " + std::to_string(id));
    std::vector<float> raw;
    try {
        raw = read_f32_le(path, static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
    } catch (const IoError& e) {
        throw ComputationError(std::string("tile ") + std::to_string(id) + ": " + e.what());
    }
    std::vector<double> probs(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = raw[i];
        if (!(v >= -1e-6 && v <= 1.0 + 1e-6)) {
            throw ComputationError("external predictor output for tile " + std::to_string(id) +
                                   " is outside [0,1] at pixel " + std::to_string(i));
        }
        probs[i] = std::clamp(v, 0.0, 1.0);
    }
    return probs;
}

}  // namespace exchange

namespace {

struct ProcessOutcome {
    int exit_code = 0;
    bool timed_out = false;
    std::string output;
};

// Runs `command "<arg>"` through /bin/sh, capturing stdout+stderr into a log
// file inside the exchange directory.
ProcessOutcome run_command(const std::string& command, const fs::path& arg, double timeout_seconds,
                           const fs::path& log_path) {
    const std::string script = command + " \"$1\"";
    const std::string arg_text = arg.string();
    const std::string log_text = log_path.string();

    const pid_t pid = fork();
    if (pid < 0) throw ComputationError("fork failed for external predictor");
    if (pid == 0) {
        setpgid(0, 0);
        const int fd = ::open(log_text.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd >= 0) {
            dup2(fd, STDOUT_FILENO);
            dup2(fd, STDERR_FILENO);
            ::close(fd);
        }
        execl("/bin/sh", "sh", "-c", script.c_str(), "sh", arg_text.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    ProcessOutcome outcome;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    int status = 0;
    for (;;) {
        const pid_t done = waitpid(pid, &status, WNOHANG);
        if (done == pid) break;
        if (done < 0) throw ComputationError("waitpid failed for external predictor");
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            outcome.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (!outcome.timed_out) {
        outcome.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    }
    std::ifstream log(log_path);
    std::ostringstream text;
    text << log.rdbuf();
    outcome.output = text.str();
    return outcome;
}

class ExchangeLock {
public:
    explicit ExchangeLock(fs::path path) : path_(std::move(path)) {
        const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
        if (fd < 0) throw ComputationError("exchange directory is busy (lock file " + path_.string() + " exists)");
        ::close(fd);
    }
    ~ExchangeLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    ExchangeLock(const ExchangeLock&) = delete;
    ExchangeLock& operator=(const ExchangeLock&) = delete;

private:
    fs::path path_;
};

}  // namespace

std::vector<TilePrediction> predict_external(const std::vector<TilePatch>& patches, const PredictorConfig& cfg) {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(cfg.exchange_dir, ec);
    if (ec || !fs::is_directory(cfg.exchange_dir)) {
        throw IoError("cannot create exchange directory " + cfg.exchange_dir.string());
    }
    ExchangeLock lock(cfg.exchange_dir / ".lock");
    const fs::path log_path = cfg.exchange_dir / "predictor.log";

    std::vector<TilePrediction> out;
    out.reserve(patches.size());
    const std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t first = 0; first < patches.size(); first += batch_size) {
        const std::size_t last = std::min(patches.size(), first + batch_size);
        std::vector<const TilePatch*> batch;
        for (std::size_t i = first; i < last; ++i) {
            batch.push_back(&patches[i]);
            fs::remove(cfg.exchange_dir / exchange::prob_file_name(i), ec);
        }
        exchange::write_batch(cfg.exchange_dir, batch, first);

        const auto outcome = run_command(cfg.external_command, cfg.exchange_dir, cfg.timeout_seconds, log_path);
        if (outcome.timed_out) {
            throw ComputationError("external predictor timed out after " + std::to_string(cfg.timeout_seconds) +
                                   " s on tiles " + std::to_string(first) + ".." + std::to_string(last - 1));
        }
        if (outcome.exit_code != 0) {
            throw ComputationError("external predictor exited with code " + std::to_string(outcome.exit_code) +
                                   " on tiles " + std::to_string(first) + ".." + std::to_string(last - 1) + ": " +
                                   outcome.output);
        }
        for (std::size_t i = first; i < last; ++i) {
            const TilePatch& patch = patches[i];
            TilePrediction pred = empty_prediction(patch);
            pred.probs = exchange::read_probs(cfg.exchange_dir, i, patch.rows);
            for (std::size_t p = 0; p < pred.probs.size(); ++p) {
                if (!pred.valid[p]) pred.probs[p] = 0.5;
            }
            out.push_back(std::move(pred));
        }
        for (std::size_t i = first; i < last; ++i) {
            fs::remove(cfg.exchange_dir / exchange::tile_file_name(i), ec);
            fs::remove(cfg.exchange_dir / exchange::prob_file_name(i), ec);
        }
        fs::remove(cfg.exchange_dir / exchange::kManifestName, ec);
        fs::remove(log_path, ec);
        spdlog::debug("external predictor finished tiles {}..{}", first, last - 1);
    }
    return out;
}

}  // namespace hota
