"""Published filter coefficients for the supported wavelet bases.

Orthogonal families store the scaling filter h (Daubechies, *Ten Lectures on
Wavelets*, 1992, Table 6.1). Biorthogonal spline families (Cohen, Daubechies
and Feauveau, 1992; Ten Lectures Table 8.3) store the analysis and synthesis
scaling filters. Values are in the zero-padded, even-length layout used by
MATLAB ``wfilters`` and PyWavelets, with the sqrt(2) normalisation.
"""

ORTHOGONAL_SCALING = {
    'haar': (
        0.7071067811865476,
        0.7071067811865476,
    ),
    'db3': (
        0.33267055295008263,
        0.8068915093110925,
        0.45987750211849154,
        -0.13501102001025458,
        -0.08544127388202666,
        0.03522629188570953,
    ),
    'db4': (
        0.2303778133088965,
        0.7148465705529157,
        0.6308807679298589,
        -0.027983769416859854,
        -0.18703481171909309,
        0.030841381835560764,
        0.0328830116668852,
        -0.010597401785069032,
    ),
    'db10': (
        0.026670057900555554,
        0.1881768000776915,
        0.5272011889317256,
        0.6884590394536035,
        0.2811723436605775,
        -0.24984642432731538,
        -0.19594627437737705,
        0.12736934033579325,
        0.09305736460357235,
        -0.07139414716639708,
        -0.029457536821875813,
        0.033212674059341,
        0.0036065535669561697,
        -0.010733175483330575,
        0.001395351747052901,
        0.001992405295185056,
        -0.0006858566949597116,
        -0.00011646685512928545,
        9.358867032006959e-05,
        -1.3264202894521244e-05,
    ),
}

BIORTHOGONAL_ANALYSIS = {
    'bior1.1': (
        0.7071067811865476,
        0.7071067811865476,
    ),
    'bior1.3': (
        -0.08838834764831845,
        0.08838834764831845,
        0.7071067811865476,
        0.7071067811865476,
        0.08838834764831845,
        -0.08838834764831845,
    ),
    'bior1.5': (
        0.016572815184059706,
        -0.016572815184059706,
        -0.12153397801643785,
        0.12153397801643785,
        0.7071067811865476,
        0.7071067811865476,
        0.12153397801643785,
        -0.12153397801643785,
        -0.016572815184059706,
        0.016572815184059706,
    ),
    'bior2.4': (
        0.0,
        0.03314563036811941,
        -0.06629126073623882,
        -0.1767766952966369,
        0.4198446513295126,
        0.9943689110435825,
        0.4198446513295126,
        -0.1767766952966369,
        -0.06629126073623882,
        0.03314563036811941,
    ),
    'bior3.7': (
        0.0030210861012608843,
        -0.009063258303782653,
        -0.01683176542131064,
        0.074663985074019,
        0.03133297870736289,
        -0.301159125922835,
        -0.02649924094534547,
        0.9516421218971786,
        0.9516421218971786,
        -0.02649924094534547,
        -0.301159125922835,
        0.03133297870736289,
        0.074663985074019,
        -0.01683176542131064,
        -0.009063258303782653,
        0.0030210861012608843,
    ),
    'bior4.4': (
        0.0,
        0.03782845550726404,
        -0.023849465019556843,
        -0.11062440441843718,
        0.37740285561283066,
        0.8526986790088938,
        0.37740285561283066,
        -0.11062440441843718,
        -0.023849465019556843,
        0.03782845550726404,
    ),
}

BIORTHOGONAL_SYNTHESIS = {
    'bior1.1': (
        0.7071067811865476,
        0.7071067811865476,
    ),
    'bior1.3': (
        0.0,
        0.0,
        0.7071067811865476,
        0.7071067811865476,
        0.0,
        0.0,
    ),
    'bior1.5': (
        0.0,
        0.0,
        0.0,
        0.0,
        0.7071067811865476,
        0.7071067811865476,
        0.0,
        0.0,
        0.0,
        0.0,
    ),
    'bior2.4': (
        0.0,
        0.0,
        0.0,
        0.3535533905932738,
        0.7071067811865476,
        0.3535533905932738,
        0.0,
        0.0,
        0.0,
        0.0,
    ),
    'bior3.7': (
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.1767766952966369,
        0.5303300858899106,
        0.5303300858899106,
        0.1767766952966369,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ),
    'bior4.4': (
        0.0,
        -0.06453888262869706,
        -0.04068941760916406,
        0.41809227322161724,
        0.7884856164055829,
        0.41809227322161724,
        -0.04068941760916406,
        -0.06453888262869706,
        0.0,
        0.0,
    ),
}
