#include "mov3d/dataset_io.h"

#include <cstdio>
#include <sstream>

#include "mov3d/error.h"

namespace mov3d {

namespace fs = std::filesystem;

namespace {

std::string numbered(std::size_t n, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%03zu%s", n, ext);
    return buf;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    for (std::string tok; is >> tok;) out.push_back(tok);
    return out;
}

}  // namespace

void write_sample(const fs::path& dir, const Sample& s) {
    fs::create_directories(dir / "frames");
    fs::create_directories(dir / "spectrograms");
    for (std::size_t i = 0; i < s.frames.size(); ++i) write_pgm(dir / "frames" / numbered(i, ".pgm"), s.frames[i]);
    for (std::size_t i = 0; i < s.spectrograms.size(); ++i) {
        write_spectrogram(dir / "spectrograms" / numbered(i, ".spg"), s.spectrograms[i]);
    }
    std::ostringstream boxes;
    boxes << "frame,x,y,w,h\n";
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
        const auto& b = s.boxes[i];
        boxes << i << ',' << b.x << ',' << b.y << ',' << b.w << ',' << b.h << '\n';
    }
    write_text_atomic(dir / "boxes.csv", boxes.str());
    write_voxels(dir / "voxels.vxg", s.voxels);
    if (!s.track.samples.empty()) write_wav(dir / "audio.wav", s.track);
    std::ostringstream meta;
    meta.precision(17);
    meta << "id " << s.id << '\n'
         << "shape " << shape_name(s.shape) << '\n'
         << "material " << material_name(s.material) << '\n'
         << "size_scale " << s.size_scale << '\n'
         << "frames " << s.frames.size() << '\n'
         << "impacts";
    for (double t : s.impact_times) meta << ' ' << t;
    meta << '\n';
    write_text_atomic(dir / "meta.txt", meta.str());
}

Sample read_sample(const fs::path& dir) {
    if (!fs::exists(dir / "meta.txt")) throw MissingPrerequisite("sample directory " + dir.string() + " has no meta.txt");
    Sample s;
    std::size_t frames = 0;
    std::istringstream meta(read_text(dir / "meta.txt"));
    for (std::string line; std::getline(meta, line);) {
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        try {
            if (tok[0] == "id" && tok.size() == 2) {
                s.id = tok[1];
            } else if (tok[0] == "shape" && tok.size() == 2) {
                const auto k = parse_shape(tok[1]);
                if (!k) throw FormatError("meta.txt: unknown shape " + tok[1]);
                s.shape = *k;
            } else if (tok[0] == "material" && tok.size() == 2) {
                const auto m = parse_material(tok[1]);
                if (!m) throw FormatError("meta.txt: unknown material " + tok[1]);
                s.material = *m;
            } else if (tok[0] == "size_scale" && tok.size() == 2) {
                s.size_scale = std::stod(tok[1]);
            } else if (tok[0] == "frames" && tok.size() == 2) {
                frames = std::stoul(tok[1]);
            } else if (tok[0] == "impacts") {
                for (std::size_t i = 1; i < tok.size(); ++i) s.impact_times.push_back(std::stod(tok[i]));
            } else {
                throw FormatError("meta.txt: unexpected line '" + line + "'");
            }
        } catch (const std::logic_error&) {
            throw FormatError("meta.txt: malformed line '" + line + "'");
        }
    }
    for (std::size_t i = 0; i < frames; ++i) {
        s.frames.push_back(read_pgm(dir / "frames" / numbered(i, ".pgm")));
        s.spectrograms.push_back(read_spectrogram(dir / "spectrograms" / numbered(i, ".spg")));
    }
    std::istringstream boxes(read_text(dir / "boxes.csv"));
    std::string line;
    std::getline(boxes, line);
    while (std::getline(boxes, line)) {
        if (line.empty()) continue;
        long f, x, y, w, h;
        if (std::sscanf(line.c_str(), "%ld,%ld,%ld,%ld,%ld", &f, &x, &y, &w, &h) != 5) {
            throw FormatError("boxes.csv: malformed row '" + line + "'");
        }
        s.boxes.push_back({x, y, w, h});
    }
    s.voxels = read_voxels(dir / "voxels.vxg");
    if (fs::exists(dir / "audio.wav")) s.track = read_wav(dir / "audio.wav");
    return s;
}

void write_manifest(const fs::path& root, const std::vector<ManifestEntry>& entries) {
    std::ostringstream os;
    os << "# id split seed scene\n";
    for (const auto& e : entries) {
        os << e.id << ' ' << split_name(e.split) << ' ' << e.seed << ' ' << (e.scene.empty() ? "-" : e.scene) << '\n';
    }
    write_text_atomic(root / "manifest", os.str());
}

std::vector<ManifestEntry> read_manifest(const fs::path& root) {
    if (!fs::exists(root / "manifest")) throw MissingPrerequisite("no dataset manifest in " + root.string());
    std::vector<ManifestEntry> out;
    std::istringstream is(read_text(root / "manifest"));
    std::size_t line_no = 0;
    for (std::string line; std::getline(is, line);) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tok = split_ws(line);
        if (tok.size() != 4) throw FormatError("manifest line " + std::to_string(line_no) + ": expected 4 fields");
        ManifestEntry e;
        e.id = tok[0];
        if (tok[1] == "train") {
            e.split = Split::train;
        } else if (tok[1] == "val") {
            e.split = Split::val;
        } else if (tok[1] == "test") {
            e.split = Split::test;
        } else {
            throw FormatError("manifest line " + std::to_string(line_no) + ": unknown split " + tok[1]);
        }
        try {
            e.seed = std::stoull(tok[2]);
        } catch (const std::logic_error&) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": bad seed");
        }
        e.scene = tok[3] == "-" ? "" : tok[3];
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<const Sample*> Dataset::split(Split s) const {
    std::vector<const Sample*> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].split == s) out.push_back(&samples[i]);
    }
    return out;
}

Dataset read_dataset(const fs::path& root) {
    Dataset d;
    d.entries = read_manifest(root);
    for (const auto& e : d.entries) d.samples.push_back(read_sample(root / "samples" / e.id));
    return d;
}

}  // namespace mov3d
