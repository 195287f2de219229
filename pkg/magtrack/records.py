"""
CSV is the interchange format between the commands.  Files are written with
a header line and '\\n' line endings so that the same data always gives the
same bytes; numbers are written with repr() unless a column asks for a fixed
format.
"""
import csv
import io

import numpy as np

from magtrack.exceptions import ParseError


def formatCell(value):
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def parseBool(text):
    lowered = text.strip().lower()
    if lowered in ('true', '1', 'yes'):
        return True
    if lowered in ('false', '0', 'no'):
        return False
    raise ValueError("not a boolean: {!r}".format(text))


def dumpCsv(header, rows):
    """
    Return the CSV document for header and rows as a string.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([formatCell(cell) for cell in row])
    return buffer.getvalue()


def writeCsv(path, header, rows):
    with open(path, 'w', newline='') as fh:
        fh.write(dumpCsv(header, rows))


def parseCsv(text, columns, path=''):
    """
    I parse a CSV document whose header names at least the given columns.

    columns is a list of (name, converter) pairs; I return one tuple per data
    line with the converted values in that order.  Blank lines are skipped.
    Anything else that doesn't fit raises ParseError naming the line.
    """
    reader = csv.reader(io.StringIO(text))
    header = None
    rows = []
    for row in reader:
        line_number = reader.line_num
        if not row or not ''.join(row).strip():
            continue
        if header is None:
            header = [cell.strip() for cell in row]
            missing = [name for name, _ in columns if name not in header]
            if missing:
                raise ParseError("missing column(s): {}".format(
                    ', '.join(missing)), path, line_number)
            indexes = [header.index(name) for name, _ in columns]
            continue
        if len(row) != len(header):
            raise ParseError("expected {} fields, found {}".format(
                len(header), len(row)), path, line_number)
        values = []
        for (name, converter), index in zip(columns, indexes):
            try:
                values.append(converter(row[index].strip()))
            except ValueError:
                raise ParseError("bad value {!r} for column {}".format(
                    row[index], name), path, line_number)
        rows.append(tuple(values))
    if header is None:
        raise ParseError("empty file, no header", path, 1)
    return rows


def readCsv(path, columns):
    with open(path, newline='') as fh:
        return parseCsv(fh.read(), columns, path)
