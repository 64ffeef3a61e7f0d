import sys

from dotenv import load_dotenv

from app.cli import main

load_dotenv()
sys.exit(main())
