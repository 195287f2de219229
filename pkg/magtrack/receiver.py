"""
The tri-axis receiver and its analog chain.

A field sensed by three orthogonal coils is reduced to its magnitude, turned
into an induced voltage, passed through a logarithmic amplifier (modelled as
an ideal envelope detector followed by the log law) and quantized by the ADC.
The resulting "rectified strength" is a raw ADC count, not a field value.
"""
from collections import namedtuple

import numpy as np
from scipy.spatial.transform import Rotation

from magtrack.exceptions import DomainError, ParameterError
from magtrack.field import dipoleField, inducedVoltageAmplitude, Pose

RawSample = namedtuple('RawSample', ['timestamp', 'coil_id', 'strength'])
RawSample.__doc__ = """
One ADC reading: receiver timestamp in milliseconds, the coil the receiver's
schedule attributes it to (-1 inside a guard interval) and the rectified
strength in counts.
"""



class ReceiverSpec(object):
    """
    Parameters of the receiver chain.

    axis_area_turns - effective area * turns of each receiver axis (m**2)
    orientation     - rotation of the receiver triad (scipy Rotation or unit
                      quaternion, None for the world axes)
    amp_slope       - log amplifier slope in volts per dB
    amp_intercept   - input level in dBV at which the amplifier outputs 0 V
    adc_bits        - ADC resolution
    adc_fullscale   - ADC input range in volts
    noise_sigma     - Gaussian noise in dB at the amplifier input
    """


    def __init__(self, axis_area_turns=1.0, orientation=None, amp_slope=0.024,
            amp_intercept=-100.0, adc_bits=24, adc_fullscale=2.5,
            noise_sigma=5.0):
        if not axis_area_turns > 0:
            raise ParameterError("axis_area_turns must be > 0")
        if not amp_slope > 0:
            raise ParameterError("amp_slope must be > 0")
        if int(adc_bits) != adc_bits or adc_bits < 1:
            raise ParameterError("adc_bits must be an integer >= 1")
        if not adc_fullscale > 0:
            raise ParameterError("adc_fullscale must be > 0")
        if not (np.isfinite(noise_sigma) and noise_sigma >= 0):
            raise ParameterError("noise_sigma must be >= 0")
        self.axis_area_turns = float(axis_area_turns)
        # Pose does the quaternion validation for us
        self.rotation = Pose(orientation=orientation).rotation
        self.amp_slope = float(amp_slope)
        self.amp_intercept = float(amp_intercept)
        self.adc_bits = int(adc_bits)
        self.adc_fullscale = float(adc_fullscale)
        self.noise_sigma = float(noise_sigma)


    @property
    def max_code(self):
        return 2 ** self.adc_bits - 1


    def withNoise(self, noise_sigma):
        """
        A copy of me with a different noise level.
        """
        return ReceiverSpec(self.axis_area_turns, self.rotation,
            self.amp_slope, self.amp_intercept, self.adc_bits,
            self.adc_fullscale, noise_sigma)


    def asDict(self):
        return {
            'axis_area_turns': self.axis_area_turns,
            'orientation': [float(q) for q in self.rotation.as_quat()],
            'amp_slope': self.amp_slope,
            'amp_intercept': self.amp_intercept,
            'adc_bits': self.adc_bits,
            'adc_fullscale': self.adc_fullscale,
            'noise_sigma': self.noise_sigma,
        }


def _inReceiverAxes(field, receiver):
    return receiver.rotation.inv().apply(np.asarray(field, dtype=float))


def senseAxes(field, receiver):
    """
    Magnitude of the field projection on each receiver axis (Tesla).
    """
    return np.abs(_inReceiverAxes(field, receiver))


def senseMagnitude(field, receiver):
    """
    Field magnitude recombined from the three receiver axes.  It does not
    depend on how the receiver is turned.
    """
    magnitude = np.linalg.norm(_inReceiverAxes(field, receiver), axis=-1)
    if np.ndim(magnitude) == 0:
        return float(magnitude)
    return magnitude


def logAmplify(v_in, receiver):
    """
    amp_slope * (20 * log10(v_in) - amp_intercept) volts for v_in > 0.
    """
    v = np.asarray(v_in, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError("log amplifier input must be > 0 V, got {!r}"
            .format(v_in))
    out = receiver.amp_slope * (20.0 * np.log10(v) - receiver.amp_intercept)
    if out.ndim == 0:
        return float(out)
    return out


def adcQuantize(v, receiver):
    """
    Clamp v to [0, fullscale] and map it onto the 2**bits - 1 ADC codes.
    Saturation is silent.
    """
    clamped = np.clip(np.asarray(v, dtype=float), 0.0, receiver.adc_fullscale)
    codes = np.rint(clamped / receiver.adc_fullscale * receiver.max_code)
    codes = codes.astype(np.int64)
    if codes.ndim == 0:
        return int(codes)
    return codes


def _amplifyWithFloor(v_in, receiver):
    # A zero envelope sits at the amplifier floor, which the ADC reads as 0
    v = np.asarray(v_in, dtype=float)
    safe = np.where(v > 0, v, 1.0)
    return np.where(v > 0, logAmplify(safe, receiver), 0.0)


def chainCounts(field_magnitude, coil, receiver, noise_db=0.0):
    """
    Run field magnitudes (Tesla) through induction, amplifier and ADC.
    noise_db is added to the amplifier input level (scalar or per sample).
    """
    voltage = inducedVoltageAmplitude(field_magnitude, coil,
        receiver.axis_area_turns)
    voltage = voltage * 10.0 ** (np.asarray(noise_db, dtype=float) / 20.0)
    return adcQuantize(_amplifyWithFloor(voltage, receiver), receiver)


def measure(coil_pose, coil, receiver_position, receiver, rng_seed):
    """
    Rectified strength (ADC counts) read at receiver_position while the coil
    at coil_pose is active.  The amplifier noise is drawn from a generator
    seeded with rng_seed, so equal inputs give equal readings.
    """
    field = dipoleField(coil_pose, coil, receiver_position)
    noise_db = 0.0
    if receiver.noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        noise_db = receiver.noise_sigma * rng.standard_normal()
    return chainCounts(senseMagnitude(field, receiver), coil, receiver,
        noise_db)
