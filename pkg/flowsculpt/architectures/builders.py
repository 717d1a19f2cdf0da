"""
Layer stacks of the four architectures.

The convolutional trunk is shared by all image classifiers:
Conv(40, 5x5) -> tanh -> pool -> Conv(100, 3x3) -> tanh -> pool -> flatten.
"""
from networks.layers import (
    Activation,
    ConcatTowers,
    Conv2dValid,
    Dense,
    Flatten,
    MaxPool2x2,
    Softmax,
)
from networks.network import MSE, NLL, Network, SummedNLL

APN_TAG = 'APN'
APNC_TAG = 'APN-C'
ITN_TAG = 'ITN'
SMC_TAG = 'SMC10'

CLASSES = 32
HIDDEN = 500
SMC_HEADS = 10

APN_INPUT = (1, 29, 100)
APNC_INPUT = (2, 12, 100)
SHAPE_INPUT = (1, 12, 100)


def conv_trunk():
    return [
        Conv2dValid(40, 5, 5), Activation('tanh'), MaxPool2x2(),
        Conv2dValid(100, 3, 3), Activation('tanh'), MaxPool2x2(),
        Flatten(),
    ]


def build_apn(seed=0):
    return Network(APN_INPUT, [
        *conv_trunk(),
        Dense(HIDDEN), Activation('tanh'),
        Dense(CLASSES), Softmax(),
    ], NLL(), seed=seed, tag=APN_TAG)


def build_apnc(seed=0):
    """
    Pre and post shapes enter as separate channels, each with its own trunk.
    """
    return Network(APNC_INPUT, [
        ConcatTowers([conv_trunk(), conv_trunk()]),
        Dense(HIDDEN), Activation('tanh'),
        Dense(CLASSES), Softmax(),
    ], NLL(), seed=seed, tag=APNC_TAG)


def build_itn(seed=0):
    """
    Fully connected autoencoder 1200 -> 500 -> 500 -> 500 -> 1200, sigmoid throughout.
    """
    height, width = SHAPE_INPUT[1:]
    return Network(SHAPE_INPUT, [
        Flatten(),
        Dense(HIDDEN), Activation('sigmoid'),
        Dense(HIDDEN), Activation('sigmoid'),
        Dense(HIDDEN), Activation('sigmoid'),
        Dense(height * width), Activation('sigmoid'),
    ], MSE(), seed=seed, tag=ITN_TAG)


def build_smc(seed=0, heads=SMC_HEADS):
    return Network(SHAPE_INPUT, [
        *conv_trunk(),
        Dense(HIDDEN), Activation('tanh'),
        Dense(heads * CLASSES), Softmax(groups=heads),
    ], SummedNLL(heads), seed=seed, tag=f'SMC{heads}')


BUILDERS = {
    'apn': build_apn,
    'apnc': build_apnc,
    'itn': build_itn,
    'smc': build_smc,
}
