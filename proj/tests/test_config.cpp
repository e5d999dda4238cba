#include <gtest/gtest.h>

#include "mov3d/config.h"
#include "mov3d/error.h"

using namespace mov3d;

TEST(ConfigTest, EmptyFileGivesDefaults) {
    auto c = parse_config("");
    EXPECT_EQ(format_config(c), format_config(RunConfig{}));
    EXPECT_EQ(c.model.variant, Variant::AV);
    EXPECT_EQ(c.train.batch_size, 8u);
    EXPECT_EQ(c.train.thresholds, (std::vector<double>{0.3, 0.4, 0.5}));
}

TEST(ConfigTest, VariantKey) {
    EXPECT_EQ(parse_config("variant=AV\n").model.variant, Variant::AV);
    EXPECT_EQ(parse_config("  variant = V  # visual only\n").model.variant, Variant::V);
}

TEST(ConfigTest, UnknownKeyNamedWithLine) {
    try {
        parse_config("# header\n\nvarant=AV\n");
        FAIL() << "accepted a misspelled key";
    } catch (const ConfigParseError& e) {
        EXPECT_EQ(e.line(), 3);
        EXPECT_NE(std::string(e.what()).find("varant"), std::string::npos);
    }
}

TEST(ConfigTest, BadValuesRejected) {
    for (const char* text : {"samples=-3", "samples=ten", "ae_lr=fast", "variant=AVX", "thresholds=0.3,1.2",
                             "split=holdout", "seed=1\nseed=2", "justtext"}) {
        EXPECT_THROW(parse_config(text), ConfigParseError) << text;
    }
    EXPECT_THROW(parse_config("fusion=mfb\nfused_dim=0"), ConfigParseError);
}

TEST(ConfigTest, FormatRoundTrips) {
    auto c = parse_config(
        "seed=42\nvariant=A\nfusion=mfb\nstage1_lr=0.00025\nthresholds=0.25,0.5\nsplit=all\n"
        "data_kind=ablation\nmaterial=oak\nshape=shell_sphere\nsegment=single\ndata_dir=/tmp/x y\n");
    const auto text = format_config(c);
    EXPECT_EQ(format_config(parse_config(text)), text);
    EXPECT_FALSE(c.split.has_value());
    EXPECT_EQ(c.data_dir, "/tmp/x y");
    EXPECT_EQ(c.train.stage1_lr, 0.00025);
    EXPECT_EQ(config_keys().size(), static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}
