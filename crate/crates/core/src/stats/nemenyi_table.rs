//! Critical values for the Nemenyi post-hoc test.
//!
//! `q_alpha(k)` is the upper-alpha quantile of the studentized range
//! distribution with infinite degrees of freedom, divided by sqrt(2).
//! Values were computed by solving
//! `k * integral phi(z) * (Phi(z) - Phi(z - q))^(k-1) dz = 1 - alpha`
//! with adaptive quadrature and bisection, and agree with the commonly
//! published tables (e.g. 1.960, 2.344, 2.569 ... at alpha = 0.05).
//!
//! Index 0 corresponds to k = 2 treatments; tables run through k = 50.

pub const MIN_TREATMENTS: usize = 2;
pub const MAX_TREATMENTS: usize = 50;

pub const SUPPORTED_ALPHAS: [f64; 3] = [0.01, 0.05, 0.10];

pub const Q_ALPHA_001: [f64; 49] = [
    2.5758293035, 2.9134943378, 3.1132503453, 3.2546859715,
    3.3637403685, 3.4522128234, 3.5264706985, 3.5903386986,
    3.6462915484, 3.6960208999, 3.7407331678, 3.7813182411,
    3.8184508563, 3.8526544765, 3.8843431545, 3.9138498871,
    3.9414463675, 3.9673570833, 3.9917695942, 4.0148421653,
    4.0367095313, 4.0574873140, 4.0772754533, 4.0961609035,
    4.1142197763, 4.1315190608, 4.1481180164, 4.1640693110,
    4.1794199576, 4.1942120907, 4.2084836147, 4.2222687483,
    4.2355984845, 4.2485009809, 4.2610018935, 4.2731246622,
    4.2848907578, 4.2963198949, 4.3074302171, 4.3182384587,
    4.3287600860, 4.3390094213, 4.3489997526, 4.3587434299,
    4.3682519512, 4.3775360384, 4.3866057053, 4.3954703179,
    4.4041386494,
];

pub const Q_ALPHA_005: [f64; 49] = [
    1.9599639845, 2.3437005864, 2.5690317725, 2.7277743709,
    2.8497054196, 2.9483200175, 3.0308784496, 3.1017303413,
    3.1636835771, 3.2186536073, 3.2680039245, 3.3127385934,
    3.3536177519, 3.3912302838, 3.4260413794, 3.4584247073,
    3.4886847994, 3.5170730087, 3.5437991315, 3.5690400300,
    3.5929461370, 3.6156464372, 3.6372523317, 3.6578606731,
    3.6775561759, 3.6964133492, 3.7144980614, 3.7318688169,
    3.7485778068, 3.7646717794, 3.7801927658, 3.7951786900,
    3.8096638827, 3.8236795186, 3.8372539887, 3.8504132197,
    3.8631809494, 3.8755789644, 3.8876273068, 3.8993444542,
    3.9107474772, 3.9218521778, 3.9326732110, 3.9432241928,
    3.9535177947, 3.9635658291, 3.9733793246, 3.9829685930,
    3.9923432900,
];

pub const Q_ALPHA_010: [f64; 49] = [
    1.6448536270, 2.0522927305, 2.2913414969, 2.4595157643,
    2.5885206019, 2.6927321010, 2.7798836082, 2.8546064312,
    2.9198888401, 2.9777682513, 3.0296941832, 3.0767334683,
    3.1196933331, 3.1591988189, 3.1957434330, 3.2297234009,
    3.2614614896, 3.2912239866, 3.3192330595, 3.3456759245,
    3.3707117596, 3.3944769972, 3.4170894284, 3.4386514268,
    3.4592525062, 3.4789713718, 3.4978775802, 3.5160328936,
    3.5334923935, 3.5503054035, 3.5665162587, 3.5821649512,
    3.5972876752, 3.6119172894, 3.6260837116, 3.6398142565,
    3.6531339271, 3.6660656664, 3.6786305758, 3.6908481056,
    3.7027362216, 3.7143115512, 3.7255895119, 3.7365844255,
    3.7473096182, 3.7577775105, 3.7679996964, 3.7779870151,
    3.7877496142,
];
