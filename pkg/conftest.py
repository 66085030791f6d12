import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'detangle.settings')
django.setup()
