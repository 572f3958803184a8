// Coefficient tables for the level-1 biorthogonal and q-shift filter banks.
// Values are the published DTCWT tables at full double precision.

pub(super) const NEAR_SYM_A_H0O: [f64; 5] = [-0.05, 0.25, 0.6, 0.25, -0.05];

pub(super) const NEAR_SYM_A_G0O: [f64; 7] = [
    -0.010714285714285713,
    -0.05357142857142857,
    0.26071428571428573,
    0.6071428571428571,
    0.26071428571428573,
    -0.05357142857142857,
    -0.010714285714285713,
];

pub(super) const NEAR_SYM_A_H1O: [f64; 7] = [
    0.010714285714285713,
    -0.05357142857142857,
    -0.26071428571428573,
    0.6071428571428571,
    -0.26071428571428573,
    -0.05357142857142857,
    0.010714285714285713,
];

pub(super) const NEAR_SYM_A_G1O: [f64; 5] = [-0.05, -0.25, 0.6, -0.25, -0.05];

pub(super) const NEAR_SYM_B_H0O: [f64; 13] = [
    -0.0017578125,
    0.0,
    0.022265625,
    -0.046875,
    -0.0482421875,
    0.296875,
    0.55546875,
    0.296875,
    -0.0482421875,
    -0.046875,
    0.022265625,
    0.0,
    -0.0017578125,
];

pub(super) const NEAR_SYM_B_G0O: [f64; 19] = [
    7.062639508928571e-05,
    0.0,
    -0.0013419015066964285,
    -0.0018833705357142855,
    0.007156808035714285,
    0.023856026785714284,
    -0.05564313616071428,
    -0.05168805803571428,
    0.29975760323660716,
    0.5594308035714286,
    0.29975760323660716,
    -0.05168805803571428,
    -0.05564313616071428,
    0.023856026785714284,
    0.007156808035714285,
    -0.0018833705357142855,
    -0.0013419015066964285,
    0.0,
    7.062639508928571e-05,
];

pub(super) const NEAR_SYM_B_H1O: [f64; 19] = [
    -7.062639508928571e-05,
    0.0,
    0.0013419015066964285,
    -0.0018833705357142855,
    -0.007156808035714285,
    0.023856026785714284,
    0.05564313616071428,
    -0.05168805803571428,
    -0.29975760323660716,
    0.5594308035714286,
    -0.29975760323660716,
    -0.05168805803571428,
    0.05564313616071428,
    0.023856026785714284,
    -0.007156808035714285,
    -0.0018833705357142855,
    0.0013419015066964285,
    0.0,
    -7.062639508928571e-05,
];

pub(super) const NEAR_SYM_B_G1O: [f64; 13] = [
    -0.0017578125,
    -0.0,
    0.022265625,
    0.046875,
    -0.0482421875,
    -0.296875,
    0.55546875,
    -0.296875,
    -0.0482421875,
    0.046875,
    0.022265625,
    -0.0,
    -0.0017578125,
];

pub(super) const LEGALL_H0O: [f64; 5] = [-0.125, 0.25, 0.75, 0.25, -0.125];

pub(super) const LEGALL_G0O: [f64; 3] = [0.25, 0.5, 0.25];

pub(super) const LEGALL_H1O: [f64; 3] = [-0.25, 0.5, -0.25];

pub(super) const LEGALL_G1O: [f64; 5] = [-0.125, -0.25, 0.75, -0.25, -0.125];

pub(super) const QSHIFT_06_H0A: [f64; 10] = [
    0.03516383657149474,
    0.0,
    -0.08832942445107285,
    0.23389032060723564,
    0.7602723690661257,
    0.5875182977235605,
    0.0,
    -0.11430183714424873,
    0.0,
    0.0,
];

pub(super) const QSHIFT_06_H1A: [f64; 10] = [
    0.0,
    -0.0,
    -0.11430183714424873,
    -0.0,
    0.5875182977235605,
    -0.7602723690661257,
    0.23389032060723564,
    0.08832942445107285,
    0.0,
    -0.03516383657149474,
];

pub(super) const QSHIFT_A_H0A: [f64; 10] = [
    0.051130405283831656,
    -0.013975370246888838,
    -0.10983605166597087,
    0.26383956105893763,
    0.7666284677930372,
    0.5636557101270515,
    0.0008736226952170968,
    -0.1002312195074762,
    -0.0016896812725281543,
    -0.006181881892116438,
];

pub(super) const QSHIFT_A_H1A: [f64; 10] = [
    -0.006181881892116438,
    0.0016896812725281543,
    -0.1002312195074762,
    -0.0008736226952170968,
    0.5636557101270515,
    -0.7666284677930372,
    0.26383956105893763,
    0.10983605166597087,
    -0.013975370246888838,
    -0.051130405283831656,
];

pub(super) const QSHIFT_B_H0A: [f64; 14] = [
    0.003253142763653182,
    -0.00388321199915849,
    0.03466034684485349,
    -0.03887280126882779,
    -0.11720388769911527,
    0.27529538466888204,
    0.7561456438925225,
    0.5688104207121227,
    0.011866092033797,
    -0.1067118046866654,
    0.023825384794920298,
    0.01702522388155399,
    -0.005439475937274115,
    -0.004556895628475491,
];

pub(super) const QSHIFT_B_H1A: [f64; 14] = [
    -0.004556895628475491,
    0.005439475937274115,
    0.01702522388155399,
    -0.023825384794920298,
    -0.1067118046866654,
    -0.011866092033797,
    0.5688104207121227,
    -0.7561456438925225,
    0.27529538466888204,
    0.11720388769911527,
    -0.03887280126882779,
    -0.03466034684485349,
    -0.00388321199915849,
    -0.003253142763653182,
];

pub(super) const QSHIFT_C_H0A: [f64; 16] = [
    -0.0047616119384559135,
    -0.00044602278926228516,
    -7.144197327965012e-05,
    0.034914612306842195,
    -0.03727389579989796,
    -0.11591145742744076,
    0.2763686431330317,
    0.7563937651990367,
    0.567134484100133,
    0.01463740596447335,
    -0.11255888425752203,
    0.02228926326692271,
    0.018498682724156248,
    -0.0072026778782583465,
    -0.0002276522058977718,
    0.002430349945148675,
];

pub(super) const QSHIFT_C_H1A: [f64; 16] = [
    0.002430349945148675,
    0.0002276522058977718,
    -0.0072026778782583465,
    -0.018498682724156248,
    0.02228926326692271,
    0.11255888425752203,
    0.01463740596447335,
    -0.567134484100133,
    0.7563937651990367,
    -0.2763686431330317,
    -0.11591145742744076,
    0.03727389579989796,
    0.034914612306842195,
    7.144197327965012e-05,
    -0.00044602278926228516,
    0.0047616119384559135,
];
