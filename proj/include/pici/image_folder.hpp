#pragma once

// Folder-of-class-folders ingestion (root/<class>/<image>). PNG and JPEG are
// decoded with OpenCV; link against pici_io.

#include "pici/augment.hpp"
#include "pici/data.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <string>
#include <vector>

namespace pici {

struct FolderLoadReport {
    std::size_t loaded = 0;
    std::size_t skipped = 0;  // unreadable or undecodable files
};

namespace detail {

inline bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace detail

/// Decodes one file to RGB in [0, 1]. Returns an empty Image when decoding fails.
inline Image read_image(const std::filesystem::path& path) {
    const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
    if (raw.empty()) return {};
    double scale = 1.0 / 255.0;
    if (raw.depth() == CV_16U) scale = 1.0 / 65535.0;
    cv::Mat f;
    raw.convertTo(f, CV_64FC3, scale);
    Image img(f.rows, f.cols, 3);
    for (int r = 0; r < f.rows; ++r)
        for (int c = 0; c < f.cols; ++c) {
            const auto& bgr = f.at<cv::Vec3d>(r, c);
            img.at(r, c, 0) = std::clamp(bgr[2], 0.0, 1.0);
            img.at(r, c, 1) = std::clamp(bgr[1], 0.0, 1.0);
            img.at(r, c, 2) = std::clamp(bgr[0], 0.0, 1.0);
        }
    return img;
}

/// Writes an RGB [0, 1] image as 8-bit PNG.
inline void write_png(const Image& img, const std::filesystem::path& path) {
    cv::Mat m(img.height(), img.width(), CV_8UC3);
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            m.at<cv::Vec3b>(r, c) = cv::Vec3b(static_cast<uchar>(std::lround(std::clamp(img.at(r, c, 2), 0.0, 1.0) * 255)),
                                              static_cast<uchar>(std::lround(std::clamp(img.at(r, c, 1), 0.0, 1.0) * 255)),
                                              static_cast<uchar>(std::lround(std::clamp(img.at(r, c, 0), 0.0, 1.0) * 255)));
    if (!cv::imwrite(path.string(), m)) throw InputError("cannot write " + path.string());
}

/// Classes are the sorted subdirectory names; files inside each are sorted by
/// name. Non-square images are center-cropped to a square.
inline Dataset load_image_folder(const std::filesystem::path& root, FolderLoadReport* report = nullptr) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw EmptyDatasetError("dataset root is not a directory: " + root.string());

    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    std::sort(class_dirs.begin(), class_dirs.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

    Dataset ds;
    ds.name = root.filename().string();
    FolderLoadReport rep;
    for (std::size_t k = 0; k < class_dirs.size(); ++k) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(class_dirs[k]))
            if (entry.is_regular_file() && detail::has_image_extension(entry.path())) files.push_back(entry.path());
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
        const std::string cls = class_dirs[k].filename().string();
        ds.class_names.push_back(cls);
        for (const auto& f : files) {
            Image img = read_image(f);
            if (img.empty()) {
                ++rep.skipped;
                continue;
            }
            ds.items.push_back({center_crop_square(img), static_cast<int>(k), cls + "/" + f.filename().string()});
            ++rep.loaded;
        }
    }
    ds.n_classes = static_cast<int>(class_dirs.size());
    if (report) *report = rep;
    if (ds.items.empty()) throw EmptyDatasetError("no readable images under " + root.string());
    return ds;
}

}  // namespace pici
