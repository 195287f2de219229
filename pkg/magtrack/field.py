"""
Magnetic field of the transmitter coils.

The on-axis strength of a circular coil is

    B(r) = mu0 * n * a**2 * I / (2 * (a**2 + r**2) ** 1.5)

and off the axis the coil is treated as a point dipole with moment
n * I * pi * a**2 along the coil normal.  Every tracking distance is many coil
radii away from the coil, where the two agree; see dipoleField().

Vectors are plain numpy arrays of shape (3,) (or (N, 3) for batches), in
meters for positions and Tesla for fields.
"""
import numpy as np
from scipy.spatial.transform import Rotation

from magtrack.exceptions import DomainError, ParameterError

MU0 = 4e-7 * np.pi
DEFAULT_DRIVE_FREQUENCY = 40000.0
QUATERNION_TOLERANCE = 1e-9
COIL_AXIS = np.array([0.0, 0.0, 1.0])


def vec3(value, name='vector'):
    """
    I return value as a float array of shape (3,), or raise ParameterError if
    it doesn't have three finite components.
    """
    array = np.asarray(value, dtype=float)
    if array.shape != (3,):
        raise ParameterError("{} must have 3 components, got shape {}".format(
            name, array.shape))
    if not np.all(np.isfinite(array)):
        raise ParameterError("{} has non-finite components: {}".format(
            name, array))
    return array


def rotationBetween(source, target):
    """
    Smallest rotation that turns direction source into direction target.
    """
    source = vec3(source) / np.linalg.norm(source)
    target = vec3(target) / np.linalg.norm(target)
    axis = np.cross(source, target)
    sine = np.linalg.norm(axis)
    cosine = float(np.dot(source, target))
    if sine < 1e-12:
        if cosine > 0:
            return Rotation.identity()
        # Antiparallel: half turn about any axis perpendicular to source
        helper = np.array([1.0, 0.0, 0.0])
        if abs(source[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        axis = np.cross(source, helper)
        return Rotation.from_rotvec(np.pi * axis / np.linalg.norm(axis))
    return Rotation.from_rotvec(axis / sine * np.arctan2(sine, cosine))



class Pose(object):
    """
    I am a rigid placement: a position in world coordinates (meters) and a
    rotation.  orientation may be a scipy Rotation, a unit quaternion in
    scalar-last (x, y, z, w) order, or None for the identity.
    """


    def __init__(self, position=(0.0, 0.0, 0.0), orientation=None):
        self.position = vec3(position, 'position')
        if orientation is None:
            self.rotation = Rotation.identity()
        elif isinstance(orientation, Rotation):
            self.rotation = orientation
        else:
            quat = np.asarray(orientation, dtype=float)
            if quat.shape != (4,) or not np.all(np.isfinite(quat)):
                raise ParameterError(
                    "orientation must be a quaternion (x, y, z, w)")
            if abs(np.linalg.norm(quat) - 1.0) > QUATERNION_TOLERANCE:
                raise ParameterError(
                    "orientation quaternion is not unit norm: |q| = {!r}"
                    .format(np.linalg.norm(quat)))
            self.rotation = Rotation.from_quat(quat)


    @classmethod
    def facing(cls, position, normal):
        """
        A pose at position whose local z axis points along normal.
        """
        return cls(position, rotationBetween(COIL_AXIS, normal))


    @property
    def normal(self):
        return self.rotation.apply(COIL_AXIS)


    @property
    def quaternion(self):
        return self.rotation.as_quat()


    def transformed(self, rotation, translation=(0.0, 0.0, 0.0)):
        """
        Apply the rigid motion x -> rotation * x + translation to this pose.
        """
        return Pose(rotation.apply(self.position) + vec3(translation),
                    rotation * self.rotation)


    def __repr__(self):
        return "Pose(position={}, quaternion={})".format(
            list(self.position), list(self.quaternion))



class CoilSpec(object):
    """
    Physical parameters of one transmitter coil: number of turns, radius in
    meters, drive current in amperes and drive frequency in hertz.
    """


    def __init__(self, turns=200, radius=0.01, current=0.1,
            drive_frequency=DEFAULT_DRIVE_FREQUENCY):
        if int(turns) != turns or turns < 1:
            raise ParameterError("turns must be a positive integer, got {!r}"
                .format(turns))
        for name, value in (('radius', radius), ('current', current),
                ('drive_frequency', drive_frequency)):
            if not (np.isfinite(value) and value > 0):
                raise ParameterError("{} must be > 0, got {!r}".format(
                    name, value))
        self.turns = int(turns)
        self.radius = float(radius)
        self.current = float(current)
        self.drive_frequency = float(drive_frequency)


    @property
    def moment(self):
        """
        Dipole moment magnitude n * I * pi * a**2 in A*m**2.
        """
        return self.turns * self.current * np.pi * self.radius ** 2


    @property
    def angular_frequency(self):
        return 2.0 * np.pi * self.drive_frequency


    def asDict(self):
        return {
            'turns': self.turns,
            'radius': self.radius,
            'current': self.current,
            'drive_frequency': self.drive_frequency,
        }


    def __eq__(self, other):
        return isinstance(other, CoilSpec) and self.asDict() == other.asDict()


    def __repr__(self):
        return "CoilSpec(turns={turns}, radius={radius}, current={current}, " \
            "drive_frequency={drive_frequency})".format(**self.asDict())


def onAxisFieldStrength(coil, r):
    """
    Field strength in Tesla on the coil axis at distance r (meters) from the
    coil centre.  r may be a scalar or an array.
    """
    r = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(r)) or np.any(r < 0):
        raise ParameterError("distance must be >= 0, got {!r}".format(r))
    a2 = coil.radius ** 2
    strength = MU0 * coil.turns * a2 * coil.current / (
        2.0 * (a2 + r * r) ** 1.5)
    if strength.ndim == 0:
        return float(strength)
    return strength


def dipoleField(coil_pose, coil, point):
    """
    Point-dipole field (Tesla) of coil placed at coil_pose, evaluated at point.
    point may be a single position (3,) or a batch (N, 3); the result has the
    same shape.

    Raises DomainError for a point within one coil radius of the centre,
    where the dipole approximation does not hold.
    """
    points = np.asarray(point, dtype=float)
    offset = points - coil_pose.position
    distance = np.linalg.norm(offset, axis=-1)
    if np.any(~np.isfinite(distance)):
        raise ParameterError("query point has non-finite components")
    if np.any(distance <= coil.radius):
        raise DomainError(
            "query point within {} m of the coil centre, dipole field is not "
            "valid there".format(coil.radius))
    unit = offset / distance[..., np.newaxis]
    moment = coil.moment * coil_pose.normal
    along = np.sum(unit * moment, axis=-1)[..., np.newaxis]
    scale = (MU0 / (4.0 * np.pi) / distance ** 3)[..., np.newaxis]
    return scale * (3.0 * along * unit - moment)


def totalField(sources, point):
    """
    Vector sum of dipoleField over sources, a list of (pose, coil) pairs.
    """
    total = np.zeros(np.shape(point), dtype=float)
    for pose, coil in sources:
        total = total + dipoleField(pose, coil, point)
    return total


def inducedVoltageAmplitude(field_magnitude, coil, receiver_axis_area_turns):
    """
    Peak voltage omega * (area * turns) * B induced in a receiver coil by a
    field of the given magnitude oscillating at the coil's drive frequency.
    """
    magnitude = np.asarray(field_magnitude, dtype=float)
    if np.any(~np.isfinite(magnitude)) or np.any(magnitude < 0):
        raise ParameterError("field magnitude must be >= 0")
    if not receiver_axis_area_turns > 0:
        raise ParameterError("receiver area*turns must be > 0, got {!r}"
            .format(receiver_axis_area_turns))
    voltage = coil.angular_frequency * receiver_axis_area_turns * magnitude
    if voltage.ndim == 0:
        return float(voltage)
    return voltage
