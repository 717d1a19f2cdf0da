"""
Text formats written by `infer`: the step trace CSV and the sequence line.
"""
import csv
import io

from flow.forward import MAX_SEQUENCE_LENGTH, validate_sequence

from .exceptions import SequenceLimitError
from .pipeline import StepRecord

TRACE_HEADER = ('step', 'stage', 'pillar', 'posterior_max', 'pmr_stage', 'pmr_final')


def trace_to_csv(trace):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(TRACE_HEADER)
    for record in trace.records:
        writer.writerow((
            record.step, record.stage, record.pillar,
            f'{record.posterior_max:.6f}', f'{record.pmr_stage:.6f}', f'{record.pmr_final:.6f}',
        ))
    return buffer.getvalue()


def trace_from_csv(text):
    """
    Parses a trace CSV back into step records (values at the written precision).

    Raises:
        ValueError: On a wrong header or malformed row.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != TRACE_HEADER:
        raise ValueError(f'not a trace file: header {header}')
    records = []
    for line, row in enumerate(reader, start=2):
        if len(row) != len(TRACE_HEADER):
            raise ValueError(f'trace line {line} has {len(row)} fields')
        step, stage, pillar, posterior_max, pmr_stage, pmr_final = row
        records.append(StepRecord(int(step), stage, int(pillar), float(posterior_max),
                                  float(pmr_stage), float(pmr_final)))
    return records


def sequence_to_text(sequence):
    validate_sequence(sequence)
    return ','.join(str(int(k)) for k in sequence) + '\n'


def sequence_from_text(text):
    """
    Parses comma-separated pillar indices; a blank line is the empty sequence.

    Raises:
        ValueError: On a non-integer field.
        InvalidPillarError: On an index outside 1..32.
        SequenceLimitError: On more pillars than a sequence may hold.
    """
    text = text.strip()
    if not text:
        return []
    try:
        sequence = [int(field) for field in text.split(',')]
    except ValueError:
        raise ValueError(f'sequence must be comma-separated integers, got {text!r}') from None
    if len(sequence) > MAX_SEQUENCE_LENGTH:
        raise SequenceLimitError(f'sequence holds {len(sequence)} pillars, at most {MAX_SEQUENCE_LENGTH} allowed')
    validate_sequence(sequence)
    return sequence
