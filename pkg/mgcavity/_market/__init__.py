from mgcavity._market._price import (
    FloatArray as FloatArray,
    LinearPrice as LinearPrice,
    PolynomialPrice as PolynomialPrice,
    PriceFunction as PriceFunction,
    PriceKind as PriceKind,
    TabulatedPrice as TabulatedPrice,
    default_operating_range as default_operating_range,
    eval_price as eval_price,
    eval_price_derivative as eval_price_derivative,
    eval_price_second_derivative as eval_price_second_derivative,
    price_from_record as price_from_record,
)
from mgcavity._market._noise import (
    DiscreteNoise as DiscreteNoise,
    GaussianNoise as GaussianNoise,
    NoiseKind as NoiseKind,
    NoiseMixture as NoiseMixture,
    NoiseModel as NoiseModel,
    NoNoise as NoNoise,
    noise_from_record as noise_from_record,
    noise_sample as noise_sample,
)
from mgcavity._market._model import MarketModel as MarketModel
