from django.db import models


class Run(models.Model):
    """
    One invocation of an artifact-writing command.
    Attributes:
        command (CharField): Management command name (e.g. "dataset", "train").
        arguments (JSONField): Argument list that reproduces the run.
        seeds (JSONField): Seeds the command consumed.
        inputs (JSONField): Files the command read.
        outputs (JSONField): Files the command wrote.
        version (CharField): Toolkit version that produced the outputs.
        duration (FloatField): Wall-clock seconds.
        created (DateTimeField): When the run finished.
    Methods:
        __str__: Command name and finish time.
    """
    # Name of the management command module, as replay looks it up
    command = models.CharField(max_length=100)
    # Flags and values in command-line form; paths are absolute
    arguments = models.JSONField(default=list)
    # Seeds in the order the command consumed them (empty for seedless commands)
    seeds = models.JSONField(default=list)
    # Absolute paths of the map libraries, datasets and checkpoints read
    inputs = models.JSONField(default=list)
    # Absolute paths written, primary output first
    outputs = models.JSONField(default=list)
    # FLOWSCULPT['VERSION'] at the time of the run
    version = models.CharField(max_length=20)
    duration = models.FloatField()
    # Set once on insert
    created = models.DateTimeField(auto_now_add=True)

    class Meta:
        """
        Metadata for the Run model.
        Attributes:
            indexes (list): Index backing the default order.
            ordering (list): Newest runs first.
        """
        # Listing by recency is the only query the runs command makes
        indexes = [
            models.Index(fields=['-created'], name='runs_run_created_idx'),
        ]
        ordering = ['-created']

    def __str__(self):
        """
        Returns:
            str: e.g. "train (2024-05-01 12:00:00)".
        """
        return f'{self.command} ({self.created:%Y-%m-%d %H:%M:%S})'
